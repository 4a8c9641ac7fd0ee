// Neural successive-cancellation decoder: four small networks standing in
// for the embedding, check-node, bit-node and soft-decision kernels, the
// all-depth cross-entropy loss, and the training loops.
//
// One set of networks is shared by every depth and position, so a model
// trained at block length 2^n_t decodes at any block length.

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "polarlab/channels.hpp"
#include "polarlab/dataset.hpp"
#include "polarlab/nn.hpp"
#include "polarlab/polar.hpp"

namespace polarlab {

struct NscArchitecture
{
	std::size_t d = 8;
	std::size_t hidden = 50;
	nn::Activation activation = nn::Activation::relu;
};

/// E: 1 -> d, F: 2d -> d, G: 2d + 1 -> d (last input is (-1)^u), H: d -> 1
/// with a logistic output. The optional e_x is the constant embedding of
/// the input-prior pass.
class NscModel
{
public:
	NscModel(const NscArchitecture& arch, Rng& rng, bool with_prior = false);
	static NscModel zeros(const NscArchitecture& arch, bool with_prior = false);

	const NscArchitecture& arch() const noexcept { return arch_; }
	std::size_t dim() const noexcept { return arch_.d; }

	nn::Mlp e, f, g, h;
	nn::Parameter e_x;
	bool has_prior = false;

	/// E sees (y - y_shift) / y_scale. Identity for discrete outputs.
	double y_shift = 0.0;
	double y_scale = 1.0;
	double e_input(double y) const noexcept { return (y - y_shift) / y_scale; }

	/// Training channel descriptor, informational.
	std::string channel;

	/// E, F, G, H (and e_x when present).
	std::vector<nn::Parameter*> parameters();
	bool all_finite() const;
	friend bool operator==(const NscModel& a, const NscModel& b);

	nn::Checkpoint to_checkpoint() const;
	static NscModel from_checkpoint(const nn::Checkpoint& ckpt);
	void save(const std::filesystem::path& path) const { to_checkpoint().save(path); }
	static NscModel load(const std::filesystem::path& path) { return from_checkpoint(nn::Checkpoint::load(path)); }

private:
	NscArchitecture arch_;
};

/// Sets y_shift/y_scale from the outputs of up to `max_blocks` blocks when
/// the outputs are real; leaves the identity map for discrete outputs.
void fit_standardization(NscModel& model, const BlockSource& data, OutputKind kind,
                         std::size_t max_blocks = 4096);

/// E applied to B blocks of outputs, rows ordered (block, position).
nn::Tape::Var nsc_embed(nn::Tape& tape, NscModel& model, std::span<const double> y);
/// e_x repeated for `rows` rows.
nn::Tape::Var nsc_prior_embed(nn::Tape& tape, NscModel& model, std::size_t rows);

struct NscLoss
{
	/// Sum of cross-entropy terms in nats, averaged over blocks.
	nn::Tape::Var loss = 0;
	/// Soft decisions of every supervised node. All depths are stacked from
	/// the top (channel embeddings) down to the leaves, each depth ordered
	/// (block, position); the last B*N rows are the leaf posteriors.
	nn::Tape::Var probs = 0;
	/// Cross-entropy terms per block: N(log2 N + 1), or N for leaves only.
	std::size_t terms = 0;
};

/// Teacher-forced loss of B stacked blocks. e0 has B*N rows; u holds the
/// true transformed bits of every block in the same order. Every node at
/// every depth is supervised with its re-encoded target bits unless
/// leaves_only is set.
NscLoss nsc_loss(nn::Tape& tape, NscModel& model, nn::Tape::Var e0, std::span<const std::uint8_t> u,
                 std::size_t blocks, bool leaves_only = false);

struct NscTrainConfig
{
	int n_t = 5;
	std::size_t iterations = 10000;
	double lr = 1e-3;
	std::uint64_t seed = 0;
	/// Blocks per iteration; the loss is their average.
	std::size_t batch = 1;
	bool leaves_only = false;
	NscArchitecture arch;
};

struct NscTrainResult
{
	NscModel model;
	/// Per-iteration loss in nats per block (for the hy variant L_X + L_Y).
	std::vector<double> loss_trace;
};

/// Each iteration draws `batch` windows of length 2^n_t uniformly with
/// replacement (block, then an aligned offset), takes u = x G_N, and makes
/// one Adam step. Throws on a non-finite loss or parameter.
NscTrainResult train_nsc(NscModel model, const BlockSource& data, const NscTrainConfig& cfg);
/// Initializes from cfg.seed and standardizes from the data first.
NscTrainResult train_nsc(const BlockSource& data, OutputKind kind, const NscTrainConfig& cfg);

/// Joint training of the channel pass and the constant-embedding input pass
/// on data drawn with a non-uniform input distribution; minimizes L_X + L_Y.
NscTrainResult train_nsc_hy(NscModel model, const BlockSource& data, const NscTrainConfig& cfg);
NscTrainResult train_nsc_hy(const BlockSource& data, OutputKind kind, const NscTrainConfig& cfg);

/// KernelSet view of a trained model for the generic SC machinery. Holds a
/// reference; the model must outlive it and must not change while in use.
class NeuralKernels final : public KernelSet
{
public:
	enum class Pass { channel, prior };

	explicit NeuralKernels(const NscModel& model, Pass pass = Pass::channel);

	std::size_t dim() const override { return model_.dim(); }
	void embed(std::span<const double> y, std::span<double> out) const override;
	void check(std::span<const double> pairs, std::span<double> out) const override;
	void bit(std::span<const double> pairs, std::span<const std::uint8_t> u,
	         std::span<double> out) const override;
	double soft(std::span<const double> e) const override;

	/// Multiply-accumulates spent in all four networks since the last reset.
	std::uint64_t macs() const noexcept { return macs_.load(); }
	void reset_macs() noexcept { macs_ = 0; }

private:
	const NscModel& model_;
	Pass pass_;
	mutable std::atomic<std::uint64_t> macs_{0};
};

} // namespace polarlab
