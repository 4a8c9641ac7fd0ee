// Successive-cancellation trellis (SCT) kernels for finite-state channels.
//
// An embedding is a tensor t[s0, sN, u] of non-negative reals, stored flat
// at index (s0 * S + sN) * 2 + u, followed by one log-scale entry. The true
// joint probability is t * exp(log_scale).

#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "polarlab/channels.hpp"
#include "polarlab/polar.hpp"

namespace polarlab {

struct FscSpec
{
	std::size_t states = 1;
	/// P(y, s' | x, s): a mass for discrete outputs, a density for real ones.
	std::function<double(double y, std::uint8_t x, std::size_t s, std::size_t s_next)> law;
	/// Initial-state distribution; uniform by default.
	std::vector<double> p_s0;

	/// Trellis of a channel model: |S| = 1 for memoryless channels, 2 for
	/// Ising, 2^m for ISI with m past inputs as state. MA-AGN has a
	/// continuous state and is rejected.
	static FscSpec from_channel(const ChannelModel& model);

	/// Point mass on the state every simulated block starts from.
	void use_reset_state();

	void validate() const;
};

inline std::size_t trellis_dim(std::size_t states) { return 2 * states * states + 1; }

/// Leaf tensor t[s0, s1, x] = P(y, s1 | x, s0), normalized by its max.
void sct_leaf(const FscSpec& fsc, double y, std::span<double> out);

/// out[s0,s2,a] = sum_{s'} sum_b left[s0,s',a^b] right[s',s2,b].
void sct_check(std::span<const double> left, std::span<const double> right, std::span<double> out,
               std::size_t states);

/// out[s0,s2,b] = sum_{s'} left[s0,s',a^b] right[s',s2,b] with a = u_prev.
void sct_bit(std::span<const double> left, std::span<const double> right, std::uint8_t u_prev,
             std::span<double> out, std::size_t states);

/// P(U = 1) from a root-span tensor and the initial-state distribution.
double sct_soft(std::span<const double> e, std::span<const double> p_s0, std::size_t states);

class TrellisKernels final : public KernelSet
{
public:
	explicit TrellisKernels(FscSpec fsc);

	std::size_t dim() const override { return trellis_dim(fsc_.states); }
	void embed(std::span<const double> y, std::span<double> out) const override;
	void check(std::span<const double> pairs, std::span<double> out) const override;
	void bit(std::span<const double> pairs, std::span<const std::uint8_t> u,
	         std::span<double> out) const override;
	double soft(std::span<const double> e) const override;

	const FscSpec& fsc() const noexcept { return fsc_; }

	/// Multiplications performed by check nodes (4|S|^3 per call) and bit
	/// nodes (2|S|^3 per call), excluding normalization.
	std::uint64_t check_multiplies() const noexcept { return check_mults_.load(); }
	std::uint64_t bit_multiplies() const noexcept { return bit_mults_.load(); }
	void reset_counters() noexcept { check_mults_ = bit_mults_ = 0; }

private:
	FscSpec fsc_;
	mutable std::atomic<std::uint64_t> check_mults_{0}, bit_mults_{0};
};

} // namespace polarlab
