#include "polarlab/polar.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "polarlab/util.hpp"

namespace polarlab {

std::vector<std::size_t> bit_reversal(std::size_t n_len)
{
	const int n = exact_log2(n_len);
	std::vector<std::size_t> perm(n_len);
	for (std::size_t i = 0; i < n_len; ++i) {
		std::size_t r = 0;
		for (int b = 0; b < n; ++b)
			r |= ((i >> b) & 1u) << (n - 1 - b);
		perm[i] = r;
	}
	return perm;
}

void encode_inplace(std::span<std::uint8_t> u)
{
	const std::size_t n_len = u.size();
	exact_log2(n_len);
	// Natural-order butterfly gives u F^{(x)n}; the bit reversal completes G_N.
	for (std::size_t half = 1; half < n_len; half *= 2)
		for (std::size_t start = 0; start < n_len; start += 2 * half)
			for (std::size_t j = start; j < start + half; ++j)
				u[j] ^= u[j + half];
	thread_local std::vector<std::size_t> perm;
	if (perm.size() != n_len)
		perm = bit_reversal(n_len);
	for (std::size_t i = 0; i < n_len; ++i)
		if (perm[i] > i)
			std::swap(u[i], u[perm[i]]);
}

std::vector<std::uint8_t> encode(std::span<const std::uint8_t> u)
{
	std::vector<std::uint8_t> x(u.begin(), u.end());
	encode_inplace(x);
	return x;
}

// ---------------------------------------------------------------------------
// Classic kernels

double channel_llr(const ChannelModel& model, double y)
{
	constexpr double c = ClassicKernels::kClamp;
	if (model.has_memory())
		throw std::invalid_argument("channel_llr: channel has memory");
	double llr;
	if (model.kind() == ChannelKind::awgn) {
		llr = -2.0 * kBpskAmplitude * y / model.sigma2();
	} else if (model.kind() == ChannelKind::isi) {
		llr = -2.0 * model.taps()[0] * kBpskAmplitude * y / model.sigma2();
	} else {
		const ChannelState s;
		const double w1 = model.transition(y, 1, s);
		const double w0 = model.transition(y, 0, s);
		if (w1 == 0.0 && w0 == 0.0)
			llr = 0.0;
		else
			llr = std::log(w1) - std::log(w0);
	}
	return std::clamp(llr, -c, c);
}

ClassicKernels::ClassicKernels(const ChannelModel& model, double prior_offset)
{
	if (model.has_memory())
		throw std::invalid_argument("classic kernels need a memoryless channel");
	if (model.is_discrete()) {
		std::vector<double> table(static_cast<std::size_t>(model.alphabet_size()));
		for (std::size_t v = 0; v < table.size(); ++v)
			table[v] = std::clamp(channel_llr(model, static_cast<double>(v)) + prior_offset, -kClamp, kClamp);
		embedding_ = [table](double y) {
			const auto v = static_cast<std::size_t>(y);
			if (!(y >= 0.0) || v >= table.size() || static_cast<double>(v) != y)
				throw std::invalid_argument("output symbol outside the channel alphabet");
			return table[v];
		};
		return;
	}
	embedding_ = [model, prior_offset](double y) {
		return std::clamp(channel_llr(model, y) + prior_offset, -kClamp, kClamp);
	};
}

ClassicKernels::ClassicKernels(std::function<double(double)> embedding)
    : embedding_(std::move(embedding))
{
}

ClassicKernels prior_kernels(double p_one)
{
	if (!(p_one >= 0.0 && p_one <= 1.0))
		throw std::invalid_argument("prior probability must lie in [0,1]");
	const double e = std::clamp(std::log(p_one) - std::log1p(-p_one), -ClassicKernels::kClamp,
	                            ClassicKernels::kClamp);
	return ClassicKernels([e](double) { return e; });
}

double ClassicKernels::f(double a, double b) noexcept
{
	// -2 atanh(tanh(a/2) tanh(b/2)) in log-domain form; the sign makes
	// positive LLRs (favouring 1) combine to the XOR hypothesis.
	a = std::clamp(a, -kClamp, kClamp);
	b = std::clamp(b, -kClamp, kClamp);
	const double fa = std::abs(a), fb = std::abs(b);
	// min + log((1 + e^-(fa+fb)) / (1 + e^-|fa-fb|)), with one log1p.
	const double lo = std::min(fa, fb);
	const double diff = std::abs(fa - fb);
	// Below 1e-16 the correction vanishes against lo.
	if (diff >= 37.0)
		return ((a < 0) != (b < 0)) ? lo : -lo;
	const double e_diff = std::exp(-diff);
	const double shrink = lo < 0.1 ? std::expm1(-2.0 * lo) : std::exp(-2.0 * lo) - 1.0;
	const double mag = lo + std::log1p(e_diff * shrink / (1.0 + e_diff));
	return ((a < 0) != (b < 0)) ? mag : -mag;
}

double ClassicKernels::h(double e) noexcept
{
	if (e >= 0)
		return 1.0 / (1.0 + std::exp(-e));
	const double z = std::exp(e);
	return z / (1.0 + z);
}

void ClassicKernels::embed(std::span<const double> y, std::span<double> out) const
{
	for (std::size_t i = 0; i < y.size(); ++i)
		out[i] = embedding_(y[i]);
}

void ClassicKernels::check(std::span<const double> pairs, std::span<double> out) const
{
	for (std::size_t j = 0; j < out.size(); ++j)
		out[j] = f(pairs[2 * j], pairs[2 * j + 1]);
}

void ClassicKernels::bit(std::span<const double> pairs, std::span<const std::uint8_t> u,
                         std::span<double> out) const
{
	for (std::size_t j = 0; j < out.size(); ++j)
		out[j] = g(pairs[2 * j], pairs[2 * j + 1], u[j]);
}

double ClassicKernels::soft(std::span<const double> e) const { return h(e[0]); }

// ---------------------------------------------------------------------------
// Counting decorator

void CountingKernels::embed(std::span<const double> y, std::span<double> out) const
{
	inner_.embed(y, out);
}

void CountingKernels::check(std::span<const double> pairs, std::span<double> out) const
{
	f_.fetch_add(out.size() / inner_.dim(), std::memory_order_relaxed);
	inner_.check(pairs, out);
}

void CountingKernels::bit(std::span<const double> pairs, std::span<const std::uint8_t> u,
                          std::span<double> out) const
{
	g_.fetch_add(out.size() / inner_.dim(), std::memory_order_relaxed);
	inner_.bit(pairs, u, out);
}

double CountingKernels::soft(std::span<const double> e) const
{
	h_.fetch_add(1, std::memory_order_relaxed);
	return inner_.soft(e);
}

// ---------------------------------------------------------------------------
// Engine

ScEngine::ScEngine(std::size_t block_length, std::size_t dim)
    : n_len_(block_length), dim_(dim), top_bits_(block_length)
{
	const int n = exact_log2(block_length);
	if (dim == 0)
		throw std::invalid_argument("embedding dimension must be positive");
	emb_.resize(n + 1);
	left_bits_.resize(n + 1);
	right_bits_.resize(n + 1);
	for (int depth = 1; depth <= n; ++depth) {
		const std::size_t len = block_length >> depth;
		emb_[depth].resize(len * dim);
		left_bits_[depth].resize(len);
		right_bits_[depth].resize(len);
	}
}

void ScEngine::check_args(const KernelSet& kernels, std::span<const double> e0) const
{
	if (kernels.dim() != dim_)
		throw std::invalid_argument("kernel dimension does not match the engine");
	if (e0.size() != n_len_ * dim_)
		throw std::invalid_argument("embedding sequence has the wrong length");
}

ScResult sc_decode(const KernelSet& kernels, std::span<const double> e0, const FrozenPattern& f)
{
	ScEngine engine(f.size(), kernels.dim());
	ScResult r;
	r.u_hat.resize(f.size());
	r.posteriors.resize(f.size());
	engine.run(kernels, e0, [&](std::size_t i, std::span<const double> e) -> std::uint8_t {
		const double p = kernels.soft(e);
		r.posteriors[i] = p;
		const std::uint8_t b = f[i] == FrozenBit::info ? (p > 0.5) : static_cast<std::uint8_t>(f[i]);
		r.u_hat[i] = b;
		return b;
	});
	return r;
}

std::vector<double> sc_posteriors(const KernelSet& kernels, std::span<const double> e0,
                                  std::span<const std::uint8_t> u)
{
	ScEngine engine(u.size(), kernels.dim());
	std::vector<double> post(u.size());
	engine.run(kernels, e0, [&](std::size_t i, std::span<const double> e) {
		post[i] = kernels.soft(e);
		return u[i];
	});
	return post;
}

// ---------------------------------------------------------------------------
// Design

std::vector<std::size_t> top_k(std::span<const double> values, std::size_t k)
{
	if (k > values.size())
		throw std::invalid_argument("k exceeds the block length");
	std::vector<std::size_t> idx(values.size());
	std::iota(idx.begin(), idx.end(), 0);
	std::stable_sort(idx.begin(), idx.end(),
	                 [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
	idx.resize(k);
	std::sort(idx.begin(), idx.end());
	return idx;
}

namespace {

double log2_clamped(double p_one, std::uint8_t u)
{
	const double p = std::clamp(u ? p_one : 1.0 - p_one, kPosteriorClamp, 1.0 - kPosteriorClamp);
	return std::log2(p);
}

std::size_t blocks_to_use(const BlockSource& data, std::size_t max_blocks)
{
	const std::size_t m = max_blocks == 0 ? data.blocks() : std::min(max_blocks, data.blocks());
	if (m == 0)
		throw std::invalid_argument("design needs at least one block");
	return m;
}

} // namespace

std::vector<double> log2_posterior_sums(const KernelSet& kernels, const BlockSource& data,
                                        std::size_t max_blocks)
{
	const std::size_t n_len = data.block_length();
	const std::size_t d = kernels.dim();
	const std::size_t m = blocks_to_use(data, max_blocks);
	ScEngine engine(n_len, d);
	std::vector<std::uint8_t> x(n_len);
	std::vector<double> y(n_len), e0(n_len * d);
	// Per-position sums in long double keep the result insensitive to block order.
	std::vector<long double> acc(n_len, 0.0L);
	for (std::size_t j = 0; j < m; ++j) {
		data.block(j, x, y);
		encode_inplace(x); // G_N is an involution: u = x G_N
		kernels.embed(y, e0);
		engine.run(kernels, e0, [&](std::size_t i, std::span<const double> e) {
			acc[i] += log2_clamped(kernels.soft(e), x[i]);
			return x[i];
		});
	}
	return {acc.begin(), acc.end()};
}

DesignResult sc_design(const KernelSet& kernels, const BlockSource& data, std::size_t k,
                       std::size_t max_blocks)
{
	if (k > data.block_length())
		throw std::invalid_argument("k exceeds the block length");
	const std::size_t m = blocks_to_use(data, max_blocks);
	DesignResult r;
	r.mi = log2_posterior_sums(kernels, data, m);
	for (auto& v : r.mi)
		v = 1.0 + v / static_cast<double>(m);
	r.info_set = top_k(r.mi, k);
	return r;
}

DesignResult sc_design_hy(const KernelSet& kernels_x, const KernelSet& kernels_y,
                          const BlockSource& data, std::size_t k, std::size_t max_blocks)
{
	if (k > data.block_length())
		throw std::invalid_argument("k exceeds the block length");
	const std::size_t m = blocks_to_use(data, max_blocks);
	const auto sx = log2_posterior_sums(kernels_x, data, m);
	const auto sy = log2_posterior_sums(kernels_y, data, m);
	DesignResult r;
	r.mi.resize(sx.size());
	for (std::size_t i = 0; i < sx.size(); ++i)
		r.mi[i] = (sy[i] - sx[i]) / static_cast<double>(m);
	r.info_set = top_k(r.mi, k);
	return r;
}

FrozenPattern frozen_pattern(std::size_t block_length, std::span<const std::size_t> info_set)
{
	FrozenPattern f(block_length, FrozenBit::zero);
	for (auto i : info_set) {
		if (i >= block_length)
			throw std::invalid_argument("information index out of range");
		f[i] = FrozenBit::info;
	}
	return f;
}

} // namespace polarlab
