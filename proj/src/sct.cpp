#include "polarlab/sct.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace polarlab {

FscSpec FscSpec::from_channel(const ChannelModel& model)
{
	FscSpec fsc;
	switch (model.kind()) {
	case ChannelKind::bsc:
	case ChannelKind::awgn:
	case ChannelKind::asym_bec:
		fsc.states = 1;
		fsc.law = [model](double y, std::uint8_t x, std::size_t, std::size_t) {
			return model.transition(y, x, ChannelState{});
		};
		break;
	case ChannelKind::ising:
		fsc.states = 2;
		fsc.law = [model](double y, std::uint8_t x, std::size_t s, std::size_t s_next) {
			if (s_next != x)
				return 0.0;
			ChannelState st;
			st.ising_s = static_cast<std::uint8_t>(s);
			return model.transition(y, x, st);
		};
		break;
	case ChannelKind::isi: {
		const int m = model.memory();
		if (m > 12)
			throw std::invalid_argument("isi trellis: memory above 12 is too large");
		fsc.states = std::size_t{1} << m;
		const std::size_t mask = fsc.states - 1;
		fsc.law = [model, mask](double y, std::uint8_t x, std::size_t s, std::size_t s_next) {
			if (s_next != (((s << 1) | x) & mask))
				return 0.0;
			ChannelState st;
			st.isi_history = static_cast<std::uint32_t>(s);
			return model.transition(y, x, st);
		};
		break;
	}
	case ChannelKind::maagn:
		throw std::invalid_argument("ma-agn has a continuous state and no finite trellis");
	}
	fsc.p_s0.assign(fsc.states, 1.0 / static_cast<double>(fsc.states));
	return fsc;
}

void FscSpec::use_reset_state()
{
	// ChannelState{} maps to state index 0 for every supported channel.
	p_s0.assign(states, 0.0);
	p_s0[0] = 1.0;
}

void FscSpec::validate() const
{
	if (states == 0 || !law)
		throw std::invalid_argument("fsc: empty specification");
	if (p_s0.size() != states)
		throw std::invalid_argument("fsc: initial distribution has the wrong size");
	double total = 0.0;
	for (double p : p_s0) {
		if (!(p >= 0.0))
			throw std::invalid_argument("fsc: negative initial probability");
		total += p;
	}
	if (std::abs(total - 1.0) > 1e-9)
		throw std::invalid_argument("fsc: initial distribution does not sum to one");
}

namespace {

// Divides the 2S^2 tensor entries by their max and returns log(max). An
// all-zero tensor (an impossible past after a wrong decision) stays zero
// with log scale -inf.
double normalize(std::span<double> t)
{
	const std::size_t n = t.size() - 1;
	const double mx = *std::max_element(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(n));
	if (!std::isfinite(mx) || mx < 0.0)
		throw std::domain_error("trellis tensor is not finite");
	if (mx == 0.0)
		return -std::numeric_limits<double>::infinity();
	const double inv = 1.0 / mx;
	for (std::size_t i = 0; i < n; ++i)
		t[i] *= inv;
	return std::log(mx);
}

void require_dim(std::size_t size, std::size_t states)
{
	if (size != trellis_dim(states))
		throw std::invalid_argument("trellis embedding has the wrong dimension");
}

} // namespace

void sct_leaf(const FscSpec& fsc, double y, std::span<double> out)
{
	const std::size_t S = fsc.states;
	require_dim(out.size(), S);
	for (std::size_t s0 = 0; s0 < S; ++s0)
		for (std::size_t s1 = 0; s1 < S; ++s1)
			for (std::uint8_t x = 0; x < 2; ++x)
				out[(s0 * S + s1) * 2 + x] = fsc.law(y, x, s0, s1);
	out[2 * S * S] = normalize(out);
}

void sct_check(std::span<const double> left, std::span<const double> right, std::span<double> out,
               std::size_t S)
{
	require_dim(left.size(), S);
	require_dim(right.size(), S);
	require_dim(out.size(), S);
	for (std::size_t s0 = 0; s0 < S; ++s0) {
		for (std::size_t s2 = 0; s2 < S; ++s2) {
			double acc0 = 0.0, acc1 = 0.0;
			for (std::size_t sp = 0; sp < S; ++sp) {
				const double* l = &left[(s0 * S + sp) * 2];
				const double* r = &right[(sp * S + s2) * 2];
				acc0 += l[0] * r[0] + l[1] * r[1];
				acc1 += l[1] * r[0] + l[0] * r[1];
			}
			out[(s0 * S + s2) * 2] = acc0;
			out[(s0 * S + s2) * 2 + 1] = acc1;
		}
	}
	const std::size_t ls = 2 * S * S;
	const double base = left[ls] + right[ls];
	out[ls] = base + normalize(out);
}

void sct_bit(std::span<const double> left, std::span<const double> right, std::uint8_t u_prev,
             std::span<double> out, std::size_t S)
{
	require_dim(left.size(), S);
	require_dim(right.size(), S);
	require_dim(out.size(), S);
	const std::size_t a = u_prev & 1u;
	for (std::size_t s0 = 0; s0 < S; ++s0) {
		for (std::size_t s2 = 0; s2 < S; ++s2) {
			double acc0 = 0.0, acc1 = 0.0;
			for (std::size_t sp = 0; sp < S; ++sp) {
				const double* l = &left[(s0 * S + sp) * 2];
				const double* r = &right[(sp * S + s2) * 2];
				acc0 += l[a] * r[0];
				acc1 += l[a ^ 1u] * r[1];
			}
			out[(s0 * S + s2) * 2] = acc0;
			out[(s0 * S + s2) * 2 + 1] = acc1;
		}
	}
	const std::size_t ls = 2 * S * S;
	const double base = left[ls] + right[ls];
	out[ls] = base + normalize(out);
}

double sct_soft(std::span<const double> e, std::span<const double> p_s0, std::size_t S)
{
	require_dim(e.size(), S);
	double a0 = 0.0, a1 = 0.0;
	for (std::size_t s0 = 0; s0 < S; ++s0) {
		for (std::size_t sn = 0; sn < S; ++sn) {
			a0 += e[(s0 * S + sn) * 2] * p_s0[s0];
			a1 += e[(s0 * S + sn) * 2 + 1] * p_s0[s0];
		}
	}
	if (a0 == 0.0 && a1 == 0.0)
		return 0.5;
	// sigma(log(a1/a0)) with the ratio clamped, so a zero side stays finite.
	double ratio = a0 == 0.0 ? 1e300 : a1 / a0;
	ratio = std::clamp(ratio, 1e-300, 1e300);
	return ratio / (1.0 + ratio);
}

TrellisKernels::TrellisKernels(FscSpec fsc) : fsc_(std::move(fsc)) { fsc_.validate(); }

void TrellisKernels::embed(std::span<const double> y, std::span<double> out) const
{
	const std::size_t d = dim();
	for (std::size_t t = 0; t < y.size(); ++t)
		sct_leaf(fsc_, y[t], out.subspan(t * d, d));
}

void TrellisKernels::check(std::span<const double> pairs, std::span<double> out) const
{
	const std::size_t d = dim();
	const std::size_t count = out.size() / d;
	const std::size_t S = fsc_.states;
	for (std::size_t j = 0; j < count; ++j)
		sct_check(pairs.subspan(2 * j * d, d), pairs.subspan((2 * j + 1) * d, d),
		          out.subspan(j * d, d), S);
	check_mults_.fetch_add(count * 4 * S * S * S, std::memory_order_relaxed);
}

void TrellisKernels::bit(std::span<const double> pairs, std::span<const std::uint8_t> u,
                         std::span<double> out) const
{
	const std::size_t d = dim();
	const std::size_t count = out.size() / d;
	const std::size_t S = fsc_.states;
	for (std::size_t j = 0; j < count; ++j)
		sct_bit(pairs.subspan(2 * j * d, d), pairs.subspan((2 * j + 1) * d, d), u[j],
		        out.subspan(j * d, d), S);
	bit_mults_.fetch_add(count * 2 * S * S * S, std::memory_order_relaxed);
}

double TrellisKernels::soft(std::span<const double> e) const
{
	return sct_soft(e, fsc_.p_s0, fsc_.states);
}

} // namespace polarlab
