// Seeded random streams with platform-independent output.
//
// std::mt19937_64 is fully specified by the standard, but the standard
// distributions are not, so uniform/Bernoulli/Gaussian draws are derived
// here from the raw 64-bit engine output. Gaussians use the basic
// Box-Muller transform (two uniforms -> two independent normals).

#pragma once

#include <cstdint>
#include <random>

namespace polarlab {

/// SplitMix64 finalizer, used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
	x += 0x9e3779b97f4a7c15ULL;
	x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
	x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
	return x ^ (x >> 31);
}

class Rng
{
public:
	explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

	/// Stream `index` of a family keyed by `seed`; streams never share state.
	static Rng stream(std::uint64_t seed, std::uint64_t index)
	{
		return Rng(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
	}

	std::uint64_t next_u64() { return engine_(); }

	/// Uniform on [0, 1) with 53 bits of resolution.
	double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

	/// Uniform on (0, 1], safe for log().
	double uniform_open0() { return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53; }

	bool bernoulli(double p) { return uniform() < p; }

	/// Uniform integer in [0, n) by rejection, n > 0.
	std::uint64_t below(std::uint64_t n)
	{
		const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
		std::uint64_t r;
		do {
			r = engine_();
		} while (r >= limit);
		return r % n;
	}

	double gaussian();

private:
	std::mt19937_64 engine_;
	double spare_ = 0.0;
	bool has_spare_ = false;
};

} // namespace polarlab
