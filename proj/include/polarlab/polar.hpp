// Arikan transform, the generic successive-cancellation engine, classic
// LLR kernels and Monte-Carlo code design.
//
// Index convention: a length-L node splits its embedding sequence into
// even/odd elements. Element 2j is always the earlier of the two, so for
// trellis kernels the left operand covers the earlier time span.
//   encode: x[2j] = a[j] ^ b[j], x[2j+1] = b[j] with a = encode(u[0:L/2]),
//           b = encode(u[L/2:L]).

#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "polarlab/channels.hpp"
#include "polarlab/dataset.hpp"

namespace polarlab {

std::vector<std::size_t> bit_reversal(std::size_t n_len);

/// x = u G_N over GF(2), in place, O(N log N).
void encode_inplace(std::span<std::uint8_t> u);
std::vector<std::uint8_t> encode(std::span<const std::uint8_t> u);

enum class FrozenBit : std::uint8_t { zero = 0, one = 1, info = 2 };
using FrozenPattern = std::vector<FrozenBit>;

/// Embedding/check/bit/soft bundle driving the SC recursion. Embeddings are
/// flat runs of dim() doubles. Batched calls take `count` operand pairs laid
/// out as [left_0 | right_0 | left_1 | right_1 | ...] and write count
/// embeddings. Implementations must be safe to call concurrently.
class KernelSet
{
public:
	virtual ~KernelSet() = default;
	virtual std::size_t dim() const = 0;
	/// One embedding per channel output.
	virtual void embed(std::span<const double> y, std::span<double> out) const = 0;
	virtual void check(std::span<const double> pairs, std::span<double> out) const = 0;
	virtual void bit(std::span<const double> pairs, std::span<const std::uint8_t> u,
	                 std::span<double> out) const = 0;
	/// P(U = 1) for one embedding.
	virtual double soft(std::span<const double> e) const = 0;
};

/// Classic d = 1 kernels: E = log W(y|1)/W(y|0) + prior offset, boxplus
/// check node, LLR-update bit node, logistic soft decision.
class ClassicKernels final : public KernelSet
{
public:
	/// Exact LLR of a memoryless channel, plus log(P(1)/P(0)).
	explicit ClassicKernels(const ChannelModel& model, double prior_offset = 0.0);
	/// Arbitrary scalar embedding, e.g. a learned proxy.
	explicit ClassicKernels(std::function<double(double)> embedding);

	std::size_t dim() const override { return 1; }
	void embed(std::span<const double> y, std::span<double> out) const override;
	void check(std::span<const double> pairs, std::span<double> out) const override;
	void bit(std::span<const double> pairs, std::span<const std::uint8_t> u,
	         std::span<double> out) const override;
	double soft(std::span<const double> e) const override;

	static constexpr double kClamp = 40.0;
	static double f(double a, double b) noexcept;
	static double g(double a, double b, std::uint8_t u) noexcept { return u ? b - a : b + a; }
	static double h(double e) noexcept;

private:
	std::function<double(double)> embedding_;
};

/// Exact log W(y|1)/W(y|0) for a memoryless channel, clamped to +-kClamp.
double channel_llr(const ChannelModel& model, double y);

/// Constant embedding log(q/(1-q)) for every output: the input-prior pass.
ClassicKernels prior_kernels(double p_one);

/// Forwards to another kernel set and counts per-element invocations.
class CountingKernels final : public KernelSet
{
public:
	explicit CountingKernels(const KernelSet& inner) : inner_(inner) {}

	std::size_t dim() const override { return inner_.dim(); }
	void embed(std::span<const double> y, std::span<double> out) const override;
	void check(std::span<const double> pairs, std::span<double> out) const override;
	void bit(std::span<const double> pairs, std::span<const std::uint8_t> u,
	         std::span<double> out) const override;
	double soft(std::span<const double> e) const override;

	std::uint64_t f_count() const noexcept { return f_.load(); }
	std::uint64_t g_count() const noexcept { return g_.load(); }
	std::uint64_t h_count() const noexcept { return h_.load(); }
	void reset() noexcept { f_ = g_ = h_ = 0; }

private:
	const KernelSet& inner_;
	mutable std::atomic<std::uint64_t> f_{0}, g_{0}, h_{0};
};

/// Reusable buffers for one block length and embedding dimension. The
/// leaf callback receives (position, leaf embedding) and returns the bit
/// that is fed back into the recursion.
class ScEngine
{
public:
	ScEngine(std::size_t block_length, std::size_t dim);

	std::size_t block_length() const noexcept { return n_len_; }

	template <typename Leaf>
	void run(const KernelSet& kernels, std::span<const double> e0, Leaf&& leaf)
	{
		check_args(kernels, e0);
		recurse(kernels, e0.data(), n_len_, 0, 0, leaf, top_bits_.data());
	}

	/// Re-encoded bits of the whole block after run(): equals encode(u_hat).
	std::span<const std::uint8_t> codeword() const noexcept { return top_bits_; }

private:
	void check_args(const KernelSet& kernels, std::span<const double> e0) const;

	template <typename Leaf>
	void recurse(const KernelSet& k, const double* e, std::size_t len, std::size_t depth,
	             std::size_t offset, Leaf& leaf, std::uint8_t* v)
	{
		if (len == 1) {
			v[0] = leaf(offset, std::span<const double>(e, dim_));
			return;
		}
		const std::size_t half = len / 2;
		const std::span<const double> pairs(e, len * dim_);
		double* child = emb_[depth + 1].data();
		std::uint8_t* v1 = left_bits_[depth + 1].data();
		std::uint8_t* v2 = right_bits_[depth + 1].data();

		k.check(pairs, std::span<double>(child, half * dim_));
		recurse(k, child, half, depth + 1, offset, leaf, v1);
		k.bit(pairs, std::span<const std::uint8_t>(v1, half), std::span<double>(child, half * dim_));
		recurse(k, child, half, depth + 1, offset + half, leaf, v2);
		for (std::size_t j = 0; j < half; ++j) {
			v[2 * j] = v1[j] ^ v2[j];
			v[2 * j + 1] = v2[j];
		}
	}

	std::size_t n_len_;
	std::size_t dim_;
	std::vector<std::vector<double>> emb_;
	std::vector<std::vector<std::uint8_t>> left_bits_, right_bits_;
	std::vector<std::uint8_t> top_bits_;
};

struct ScResult
{
	std::vector<std::uint8_t> u_hat;
	/// P(U_i = 1 | u_hat^{i-1}, y).
	std::vector<double> posteriors;
};

/// Genie-free SC decoding of one block from its channel embeddings.
ScResult sc_decode(const KernelSet& kernels, std::span<const double> e0, const FrozenPattern& f);

/// Teacher-forced posteriors P(U_i = 1 | u^{i-1}, y) for known u.
std::vector<double> sc_posteriors(const KernelSet& kernels, std::span<const double> e0,
                                  std::span<const std::uint8_t> u);

struct DesignResult
{
	std::vector<std::size_t> info_set;
	/// Per-position mutual-information estimates in bits.
	std::vector<double> mi;
};

inline constexpr double kPosteriorClamp = 1e-12;

/// Indices of the k largest values, ties to the lower index, sorted.
std::vector<std::size_t> top_k(std::span<const double> values, std::size_t k);

/// Sum over blocks of log2 P(u_i | u^{i-1}, y) per position (teacher forcing).
std::vector<double> log2_posterior_sums(const KernelSet& kernels, const BlockSource& data,
                                        std::size_t max_blocks = 0);

/// Monte-Carlo design: I_i = 1 + mean log2 P(u_i | u^{i-1}, y), top-k.
/// max_blocks = 0 uses every block of the source.
DesignResult sc_design(const KernelSet& kernels, const BlockSource& data, std::size_t k,
                       std::size_t max_blocks = 0);

/// Asymmetric-input design: I_i = -mean log2 P(u_i|u^{i-1}) + mean log2 P(u_i|u^{i-1},y).
DesignResult sc_design_hy(const KernelSet& kernels_x, const KernelSet& kernels_y,
                          const BlockSource& data, std::size_t k, std::size_t max_blocks = 0);

/// Frozen pattern with the given information set and all-zero frozen bits.
FrozenPattern frozen_pattern(std::size_t block_length, std::span<const std::size_t> info_set);

} // namespace polarlab
