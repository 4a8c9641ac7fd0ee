// Exhaustive reference posteriors for short blocks, computed from the
// channel simulator's own transition law and state update.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "polarlab/channels.hpp"

namespace polarlab {

/// P(U_i = 1 | u^{i-1}, y) for every i by enumerating all 2^N inputs,
/// starting from the reset channel state, with i.i.d. inputs P(X = 1) = q.
/// N <= 16.
std::vector<double> brute_force_posteriors(const ChannelModel& channel, double q, std::span<const double> y,
                                           std::span<const std::uint8_t> u);

struct OracleReport
{
	std::size_t blocks = 0;
	std::size_t positions = 0;
	double max_abs_diff = 0.0;
};

/// Compares exact SC posteriors (classic kernels for memoryless channels,
/// trellis kernels otherwise) with brute force on `blocks` sampled blocks
/// of length 2^n.
OracleReport oracle_check(const ChannelModel& channel, int n, std::size_t blocks, std::uint64_t seed, double q = 0.5);

} // namespace polarlab
