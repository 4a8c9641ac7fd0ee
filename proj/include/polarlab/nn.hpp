// Small multilayer perceptrons with a reverse-mode tape and Adam.
//
// Batches are row-major matrices with one sample per row. A Tape records
// every operation of one forward pass; backward() visits the nodes in
// reverse order and accumulates gradients into the Parameters it touched.

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "polarlab/rng.hpp"

namespace polarlab::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation : std::uint8_t { identity = 0, relu = 1, tanh = 2, logistic = 3 };

Activation parse_activation(const std::string& s);
std::string to_string(Activation a);

/// Trainable tensor with its gradient accumulator.
struct Parameter
{
	Matrix value;
	Matrix grad;

	Parameter() = default;
	explicit Parameter(Matrix v) : value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
	void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

struct Layer
{
	Parameter w; ///< out x in
	Parameter b; ///< 1 x out
	Activation act = Activation::identity;

	std::size_t in_dim() const { return static_cast<std::size_t>(w.value.cols()); }
	std::size_t out_dim() const { return static_cast<std::size_t>(w.value.rows()); }
};

class Mlp
{
public:
	Mlp() = default;
	/// dims = {in, hidden..., out}; hidden layers use `hidden`, the last `output`.
	/// Weights are He-uniform, U(-sqrt(6/fan_in), sqrt(6/fan_in)), biases zero.
	Mlp(const std::vector<std::size_t>& dims, Activation hidden, Activation output, Rng& rng);
	/// All-zero network of the given shape.
	static Mlp zeros(const std::vector<std::size_t>& dims, Activation hidden, Activation output);

	std::size_t input_dim() const;
	std::size_t output_dim() const;
	std::vector<std::size_t> dims() const;

	/// Batched evaluation without recording.
	Matrix forward(const Matrix& x) const;
	std::vector<double> forward(std::span<const double> x) const;

	std::vector<Layer>& layers() { return layers_; }
	const std::vector<Layer>& layers() const { return layers_; }

	std::vector<Parameter*> parameters();
	std::size_t parameter_count() const;
	/// Multiply-accumulates per evaluated row.
	std::size_t macs_per_row() const;
	void zero_grad();
	bool all_finite() const;

	/// Copies parameters from `other`; throws if the architectures differ.
	void assign(const Mlp& other);

	friend bool operator==(const Mlp& a, const Mlp& b);

private:
	std::vector<Layer> layers_;
};

void apply_activation(Matrix& m, Activation a);

class Tape
{
public:
	using Var = std::size_t;

	/// Constant input; its gradient is still available after backward().
	Var input(Matrix value);
	/// Leaf bound to a parameter: backward() adds into p.grad.
	Var param(Parameter& p);

	Var linear(Var x, Layer& layer);
	Var activate(Var x, Activation a);
	Var mlp(Var x, Mlp& net);

	Var add(Var a, Var b);
	Var sub(Var a, Var b);
	Var scale(Var a, double s);
	Var concat_cols(const std::vector<Var>& parts);
	Var concat_rows(const std::vector<Var>& parts);
	Var gather_rows(Var x, std::vector<std::size_t> rows);
	/// Repeats a 1 x d row `rows` times.
	Var broadcast_row(Var row, std::size_t rows);
	/// 1 x 1 sum of every entry.
	Var sum(Var x);
	/// 1 x 1 mean of every entry.
	Var mean(Var x);
	/// 1 x 1 log(mean(exp(x))), max-shifted.
	Var log_mean_exp(Var x);
	/// Sum over rows of -t log p - (1 - t) log(1 - p) for an R x 1 column of
	/// probabilities, with p clamped to [kBceClamp, 1 - kBceClamp]. The
	/// gradient of the clamp is passed straight through.
	Var bce_sum(Var p, std::vector<double> targets);

	static constexpr double kBceClamp = 1e-7;

	const Matrix& value(Var v) const { return nodes_[v].value; }
	const Matrix& grad(Var v) const { return nodes_[v].grad; }
	std::size_t size() const { return nodes_.size(); }

	/// Seeds d(out)/d(out) = 1 for a 1 x 1 node and runs the reverse sweep.
	void backward(Var out);
	void clear() { nodes_.clear(); }

private:
	struct Node
	{
		Matrix value;
		Matrix grad;
		std::function<void(Tape&, std::size_t)> back;
	};
	Var push(Matrix value, std::function<void(Tape&, std::size_t)> back);
	Matrix& g(Var v);

	std::vector<Node> nodes_;
};

struct AdamConfig
{
	double lr = 1e-3;
	double beta1 = 0.9;
	double beta2 = 0.999;
	double eps = 1e-8;
};

class Adam
{
public:
	Adam(std::vector<Parameter*> params, AdamConfig config = {});
	/// Applies one update from the accumulated gradients (does not zero them).
	void step();
	void zero_grad();
	std::uint64_t steps() const { return t_; }
	const AdamConfig& config() const { return cfg_; }

private:
	std::vector<Parameter*> params_;
	std::vector<Matrix> m_, v_;
	AdamConfig cfg_;
	std::uint64_t t_ = 0;
};

/// Versioned binary container: a kind tag, string metadata, named networks
/// and named vectors, with an FNV-1a checksum over the whole payload.
struct Checkpoint
{
	std::string kind;
	std::map<std::string, std::string> meta;
	std::vector<std::pair<std::string, Mlp>> nets;
	std::vector<std::pair<std::string, std::vector<double>>> vectors;

	const Mlp& net(const std::string& name) const;
	const std::vector<double>& vec(const std::string& name) const;
	const std::string& get(const std::string& key) const;

	std::string serialize() const;
	static Checkpoint deserialize(const std::string& bytes);
	void save(const std::filesystem::path& path) const;
	static Checkpoint load(const std::filesystem::path& path);
};

} // namespace polarlab::nn
