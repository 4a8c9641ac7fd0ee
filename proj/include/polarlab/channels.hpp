// Channel simulators for binary-input channels with and without memory.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "polarlab/rng.hpp"

namespace polarlab {

enum class ChannelKind { bsc, awgn, asym_bec, ising, isi, maagn };
enum class OutputKind { binary, ternary, real };

/// Output symbol used by the asymmetric BEC for an erasure.
inline constexpr std::uint8_t kErasure = 2;

/// Amplitude of the antipodal symbols on real-output channels:
/// x = 0 maps to +kBpskAmplitude, x = 1 to -kBpskAmplitude.
inline constexpr double kBpskAmplitude = 0.70710678118654752440;

inline constexpr double bpsk(std::uint8_t x) noexcept
{
	return x ? -kBpskAmplitude : kBpskAmplitude;
}

/// State carried between channel uses. Reset to the defaults at every block.
struct ChannelState
{
	std::uint8_t ising_s = 0;
	/// Bit i holds x_{t-1-i}.
	std::uint32_t isi_history = 0;
	double ma_z_prev = 0.0;

	friend bool operator==(const ChannelState&, const ChannelState&) = default;
};

class ChannelModel
{
public:
	static ChannelModel bsc(double p);
	static ChannelModel awgn(double sigma2);
	static ChannelModel asym_bec(double eps0, double eps1);
	static ChannelModel ising();
	/// Taps h_0..h_m, so memory m = taps.size() - 1.
	static ChannelModel isi(std::vector<double> taps, double sigma2);
	/// h_i = decay^i for i = 0..m.
	static ChannelModel isi_geometric(int m, double decay, double sigma2);
	static ChannelModel maagn(double alpha, double sigma2);

	/// Parses `name[:p1,p2,...]`, e.g. `bsc:0.1`, `isi:2,0.9,0.5`.
	static ChannelModel parse(std::string_view descriptor);
	std::string descriptor() const;

	ChannelKind kind() const noexcept { return kind_; }
	OutputKind output_kind() const noexcept;
	bool is_discrete() const noexcept { return output_kind() != OutputKind::real; }
	bool has_memory() const noexcept;
	/// Number of distinct output symbols for discrete channels, 0 otherwise.
	int alphabet_size() const noexcept;

	double p() const noexcept { return p_; }
	double sigma2() const noexcept { return sigma2_; }
	double eps0() const noexcept { return eps0_; }
	double eps1() const noexcept { return eps1_; }
	double alpha() const noexcept { return alpha_; }
	int memory() const noexcept { return static_cast<int>(taps_.size()) - 1; }
	const std::vector<double>& taps() const noexcept { return taps_; }

	/// Noiseless part of the ISI output for input x given the past inputs.
	double isi_mean(std::uint8_t x, std::uint32_t history) const noexcept;

	/// P(y | x, state): a mass for discrete outputs, a density for real ones.
	double transition(double y, std::uint8_t x, const ChannelState& state) const noexcept;

	/// State after emitting y for input x.
	ChannelState next_state(const ChannelState& state, std::uint8_t x, double y) const noexcept;

	/// One channel use.
	double sample(std::uint8_t x, ChannelState& state, Rng& rng) const;

	/// Transmits a whole block starting from `state`, updating it in place.
	void sample_block(std::span<const std::uint8_t> x, std::span<double> y, ChannelState& state,
	                  Rng& rng) const;

private:
	ChannelModel() = default;

	ChannelKind kind_ = ChannelKind::bsc;
	double p_ = 0.0;
	double sigma2_ = 1.0;
	double eps0_ = 0.0;
	double eps1_ = 0.0;
	double alpha_ = 0.0;
	std::vector<double> taps_{1.0};
};

/// Free-function forms of the channel operations.
inline double exact_transition(const ChannelModel& model, double y, std::uint8_t x,
                               const ChannelState& state)
{
	return model.transition(y, x, state);
}

inline ChannelState sample_block(const ChannelModel& model, std::span<const std::uint8_t> x,
                                 std::span<double> y, ChannelState state, Rng& rng)
{
	model.sample_block(x, y, state, rng);
	return state;
}

double normal_density(double z, double sigma2) noexcept;

} // namespace polarlab
