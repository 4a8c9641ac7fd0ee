#include "polarlab/oracle.hpp"

#include <stdexcept>

#include "polarlab/kernel_source.hpp"
#include "polarlab/polar.hpp"

namespace polarlab {

std::vector<double> brute_force_posteriors(const ChannelModel& channel, double q, std::span<const double> y,
                                           std::span<const std::uint8_t> u)
{
	const std::size_t n_len = y.size();
	if (u.size() != n_len || n_len == 0 || n_len > 16)
		throw std::invalid_argument("brute force: need 1 <= N <= 16 and matching lengths");
	const std::size_t count = std::size_t{1} << n_len;
	// weight[v] = P(x(v)) p(y | x(v)) for the input word whose bit i is u_i.
	std::vector<double> weight(count);
	std::vector<std::uint8_t> uu(n_len);
	for (std::size_t v = 0; v < count; ++v) {
		for (std::size_t i = 0; i < n_len; ++i)
			uu[i] = (v >> i) & 1u;
		const auto x = encode(uu);
		ChannelState st;
		double w = 1.0;
		for (std::size_t t = 0; t < n_len && w > 0.0; ++t) {
			w *= channel.transition(y[t], x[t], st) * (x[t] ? q : 1.0 - q);
			st = channel.next_state(st, x[t], y[t]);
		}
		weight[v] = w;
	}
	std::vector<double> post(n_len);
	std::size_t prefix = 0;
	for (std::size_t i = 0; i < n_len; ++i) {
		long double a0 = 0, a1 = 0;
		const std::size_t mask = (std::size_t{1} << i) - 1;
		for (std::size_t v = 0; v < count; ++v) {
			if ((v & mask) != prefix)
				continue;
			((v >> i) & 1u ? a1 : a0) += weight[v];
		}
		post[i] = a0 + a1 > 0 ? static_cast<double>(a1 / (a0 + a1)) : 0.5;
		prefix |= static_cast<std::size_t>(u[i] & 1u) << i;
	}
	return post;
}

OracleReport oracle_check(const ChannelModel& channel, int n, std::size_t blocks, std::uint64_t seed, double q)
{
	if (n < 0 || n > 4)
		throw std::invalid_argument("oracle check supports n in [0, 4]");
	if (channel.kind() == ChannelKind::maagn)
		throw std::invalid_argument("no exact decoder exists for ma-agn");
	const std::size_t n_len = std::size_t{1} << n;
	const auto input = q == 0.5 ? InputDistribution::uniform() : InputDistribution::bernoulli(q);
	const KernelBundle kb = make_kernels(channel.has_memory() ? "sct" : "classic", channel, input);
	const SampledBlocks data(channel, input, blocks, n_len, seed);
	OracleReport r;
	std::vector<std::uint8_t> x(n_len);
	std::vector<double> y(n_len), e0(n_len * kb.channel->dim());
	for (std::size_t j = 0; j < blocks; ++j) {
		data.block(j, x, y);
		const auto u = encode(x);
		kb.channel->embed(y, e0);
		const auto sc = sc_posteriors(*kb.channel, e0, u);
		const auto bf = brute_force_posteriors(channel, q, y, u);
		for (std::size_t i = 0; i < n_len; ++i)
			r.max_abs_diff = std::max(r.max_abs_diff, std::abs(sc[i] - bf[i]));
		r.positions += n_len;
	}
	r.blocks = blocks;
	return r;
}

} // namespace polarlab
