// Neural mutual-information estimation with the Donsker-Varadhan bound, and
// the scalar channel-embedding proxy T(1, y) - T(0, y) it yields.

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "polarlab/channels.hpp"
#include "polarlab/dataset.hpp"
#include "polarlab/nn.hpp"
#include "polarlab/polar.hpp"

namespace polarlab {

/// mean(t_joint) - log(mean(exp(t_marginal))), in nats.
double dv_objective(std::span<const double> t_joint, std::span<const double> t_marginal);
nn::Tape::Var dv_objective(nn::Tape& tape, nn::Tape::Var t_joint, nn::Tape::Var t_marginal);

/// T(x, y) with x fed as 0/1 and y as (y - y_shift) / y_scale.
struct MineModel
{
	nn::Mlp t;
	double y_shift = 0.0;
	double y_scale = 1.0;
	std::string channel;
	/// DV objective (nats) of every training minibatch.
	std::vector<double> trace;
	/// Full-data DV estimate in bits after training.
	double mi_bits = 0.0;

	static MineModel init(std::size_t hidden, Rng& rng);
	double operator()(std::uint8_t x, double y) const;

	nn::Checkpoint to_checkpoint() const;
	static MineModel from_checkpoint(const nn::Checkpoint& ckpt);
	void save(const std::filesystem::path& path) const { to_checkpoint().save(path); }
	static MineModel load(const std::filesystem::path& path) { return from_checkpoint(nn::Checkpoint::load(path)); }
};

struct MineConfig
{
	std::size_t iterations = 3000;
	std::size_t batch = 1024;
	double lr = 1e-3;
	std::size_t hidden = 64;
	std::uint64_t seed = 0;
	/// Cap on the number of (x, y) pairs taken from the data; 0 = all.
	std::size_t max_samples = 0;
};

/// Fisher-Yates with the project's Rng, portable across standard libraries.
void shuffle(std::span<std::size_t> v, Rng& rng);

/// Every position of every block is one sample (the channel is memoryless).
/// Each iteration draws a minibatch with replacement, pairs it with a fresh
/// shuffle of its outputs and takes one Adam ascent step.
MineModel train_mine(const BlockSource& data, OutputKind kind, const MineConfig& cfg);

/// DV estimate in bits on a set of pairs, with a seeded shuffle.
double mine_estimate_bits(const MineModel& model, std::span<const std::uint8_t> x, std::span<const double> y,
                          std::uint64_t seed);

/// E(y) = T(1, y) - T(0, y) + prior_offset, as d = 1 classic kernels.
ClassicKernels extract_embedding(const MineModel& model, double prior_offset = 0.0);

} // namespace polarlab
