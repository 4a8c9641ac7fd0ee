#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "polarlab/code.hpp"
#include "polarlab/polar.hpp"
#include "polarlab/util.hpp"

using namespace polarlab;

namespace {

std::vector<double> random_outputs(const ChannelModel& m, std::size_t n_len, Rng& rng,
                                   std::vector<std::uint8_t>* u_out = nullptr)
{
	std::vector<std::uint8_t> u(n_len);
	for (auto& b : u)
		b = rng.bernoulli(0.5);
	const auto x = encode(u);
	std::vector<double> y(n_len);
	ChannelState s;
	m.sample_block(x, y, s, rng);
	if (u_out)
		*u_out = u;
	return y;
}

std::vector<double> memoryless_oracle(const ChannelModel& m, std::span<const double> y,
                                      std::span<const std::uint8_t> u, double q = 0.5)
{
	const auto w = oracle::joint_weights(
	    u.size(),
	    [&](std::span<const std::uint8_t> x) {
		    double p = 1.0;
		    for (std::size_t t = 0; t < x.size(); ++t)
			    p *= m.transition(y[t], x[t], ChannelState{});
		    return p;
	    },
	    [&](std::span<const std::uint8_t> x) { return oracle::iid_prob(x, q); });
	return oracle::posteriors(w, u);
}

/// Presents the blocks of another source in a permuted order.
class PermutedBlocks final : public BlockSource
{
public:
	PermutedBlocks(const BlockSource& inner, std::vector<std::size_t> order)
	    : inner_(inner), order_(std::move(order))
	{
	}
	std::size_t blocks() const override { return order_.size(); }
	std::size_t block_length() const override { return inner_.block_length(); }
	void block(std::size_t j, std::span<std::uint8_t> x, std::span<double> y) const override
	{
		inner_.block(order_[j], x, y);
	}

private:
	const BlockSource& inner_;
	std::vector<std::size_t> order_;
};

} // namespace

TEST_CASE("bit reversal")
{
	CHECK(bit_reversal(2) == std::vector<std::size_t>{0, 1});
	CHECK(bit_reversal(4) == std::vector<std::size_t>{0, 2, 1, 3});
	for (std::size_t n_len : {8u, 16u, 64u}) {
		const auto p = bit_reversal(n_len);
		for (std::size_t i = 0; i < n_len; ++i)
			CHECK(p[p[i]] == i);
	}
	CHECK_THROWS_AS(bit_reversal(6), std::invalid_argument);
}

TEST_CASE("encode matches the explicit generator matrix")
{
	for (std::size_t n_len : {2u, 4u, 8u, 16u}) {
		const auto g = oracle::generator_matrix(n_len);
		for (std::size_t v = 0; v < (std::size_t{1} << n_len); ++v) {
			const auto u = oracle::bits_of(v, n_len);
			std::vector<std::uint8_t> x(n_len, 0);
			for (std::size_t i = 0; i < n_len; ++i)
				if (u[i])
					for (std::size_t j = 0; j < n_len; ++j)
						x[j] ^= g[i][j];
			REQUIRE(encode(u) == x);
			REQUIRE(encode(encode(u)) == u);
		}
	}
	CHECK(encode(std::vector<std::uint8_t>{0, 0, 0, 0}) == std::vector<std::uint8_t>{0, 0, 0, 0});
	CHECK(encode(std::vector<std::uint8_t>{0, 0, 0, 1}) == std::vector<std::uint8_t>{1, 1, 1, 1});
	std::vector<std::uint8_t> bad(3);
	CHECK_THROWS_AS(encode_inplace(bad), std::invalid_argument);
}

TEST_CASE("classic kernel formulas")
{
	for (double e : {-50.0, -3.0, 0.0, 0.7, 45.0})
		CHECK(std::abs(ClassicKernels::f(0.0, e)) < 1e-15);
	CHECK(ClassicKernels::g(1.0, 2.0, 1) == 1.0);
	CHECK(ClassicKernels::g(1.0, 2.0, 0) == 3.0);
	CHECK(ClassicKernels::h(0.0) == 0.5);
	CHECK(ClassicKernels::h(-800.0) >= 0.0);
	CHECK(ClassicKernels::h(800.0) <= 1.0);

	// Log-domain form against the negated tanh form away from saturation.
	Rng rng(3);
	for (int t = 0; t < 200; ++t) {
		const double a = 16.0 * (rng.uniform() - 0.5);
		const double b = 16.0 * (rng.uniform() - 0.5);
		const double ref = -2.0 * std::atanh(std::tanh(a / 2) * std::tanh(b / 2));
		CHECK(std::abs(ClassicKernels::f(a, b) - ref) < 1e-9);
	}
	// Saturated inputs stay finite.
	CHECK(std::isfinite(ClassicKernels::f(1e6, -1e6)));
	CHECK(std::abs(ClassicKernels::f(1e6, 1e6) + ClassicKernels::kClamp) < 1.0);
}

TEST_CASE("channel LLRs")
{
	CHECK(channel_llr(ChannelModel::bsc(0.1), 1.0) == doctest::Approx(std::log(9.0)));
	CHECK(channel_llr(ChannelModel::bsc(0.1), 0.0) == doctest::Approx(-std::log(9.0)));
	CHECK(channel_llr(ChannelModel::bsc(0.0), 1.0) == ClassicKernels::kClamp);
	const auto bec = ChannelModel::asym_bec(0.4, 0.8159);
	CHECK(channel_llr(bec, 2.0) == doctest::Approx(std::log(0.8159 / 0.4)));
	CHECK(channel_llr(bec, 0.0) == -ClassicKernels::kClamp);
	const auto awgn = ChannelModel::awgn(0.5);
	for (double y : {-1.3, 0.0, 0.4}) {
		const double ref = std::log(awgn.transition(y, 1, {}) / awgn.transition(y, 0, {}));
		CHECK(channel_llr(awgn, y) == doctest::Approx(ref).epsilon(1e-12));
	}
	CHECK_THROWS(ClassicKernels(ChannelModel::ising()));
}

TEST_CASE("SC posteriors equal brute-force enumeration on memoryless channels")
{
	Rng rng(11);
	const std::vector<ChannelModel> models{ChannelModel::bsc(0.1), ChannelModel::awgn(0.5),
	                                       ChannelModel::asym_bec(0.4, 0.8159)};
	for (const auto& m : models) {
		const ClassicKernels k(m);
		for (std::size_t n_len : {2u, 4u, 8u}) {
			for (int trial = 0; trial < 10; ++trial) {
				std::vector<std::uint8_t> u;
				const auto y = random_outputs(m, n_len, rng, &u);
				std::vector<double> e0(n_len);
				k.embed(y, e0);
				const auto got = sc_posteriors(k, e0, u);
				const auto ref = memoryless_oracle(m, y, u);
				for (std::size_t i = 0; i < n_len; ++i)
					REQUIRE(std::abs(got[i] - ref[i]) < 1e-9);
			}
		}
	}
}

TEST_CASE("sc_decode N=2 BSC example and decision rule")
{
	const auto m = ChannelModel::bsc(0.1);
	const ClassicKernels k(m);
	const std::vector<double> y{0, 0};
	std::vector<double> e0(2);
	k.embed(y, e0);
	const FrozenPattern f{FrozenBit::info, FrozenBit::info};
	const auto r = sc_decode(k, e0, f);
	const auto ref = memoryless_oracle(m, y, r.u_hat);
	CHECK(std::abs(r.posteriors[0] - ref[0]) < 1e-9);
	CHECK(std::abs(r.posteriors[1] - ref[1]) < 1e-9);
	CHECK(r.u_hat == std::vector<std::uint8_t>{0, 0});

	// Posterior exactly 0.5 decides 0.
	const std::vector<double> flat{0.0, 0.0};
	const auto r2 = sc_decode(k, flat, f);
	CHECK(r2.posteriors[0] == 0.5);
	CHECK(r2.u_hat[0] == 0);
}

TEST_CASE("all-frozen decoding copies the frozen values")
{
	const ClassicKernels k(ChannelModel::bsc(0.2));
	Rng rng(5);
	const std::size_t n_len = 16;
	FrozenPattern f(n_len);
	std::vector<std::uint8_t> expect(n_len);
	for (std::size_t i = 0; i < n_len; ++i) {
		expect[i] = rng.bernoulli(0.5);
		f[i] = expect[i] ? FrozenBit::one : FrozenBit::zero;
	}
	const auto y = random_outputs(ChannelModel::bsc(0.2), n_len, rng);
	std::vector<double> e0(n_len);
	k.embed(y, e0);
	CHECK(sc_decode(k, e0, f).u_hat == expect);
}

TEST_CASE("noiseless BSC decodes perfectly")
{
	const auto m = ChannelModel::bsc(0.0);
	const ClassicKernels k(m);
	Rng rng(9);
	for (std::size_t n_len : {8u, 64u, 1024u}) {
		std::vector<std::uint8_t> u;
		const auto y = random_outputs(m, n_len, rng, &u);
		std::vector<double> e0(n_len);
		k.embed(y, e0);
		const FrozenPattern f(n_len, FrozenBit::info);
		CHECK(sc_decode(k, e0, f).u_hat == u);
	}
}

TEST_CASE("kernel invocation counts")
{
	const ClassicKernels base(ChannelModel::bsc(0.1));
	for (std::size_t n_len : {2u, 8u, 256u, 1024u}) {
		CountingKernels k(base);
		std::vector<double> e0(n_len, 0.3);
		sc_decode(k, e0, FrozenPattern(n_len, FrozenBit::info));
		const auto n = static_cast<std::uint64_t>(exact_log2(n_len));
		CHECK(k.f_count() == n_len / 2 * n);
		CHECK(k.g_count() == n_len / 2 * n);
		CHECK(k.h_count() == n_len);
	}
}

TEST_CASE("sc_design trivial channels")
{
	const std::size_t n_len = 8;
	{
		const auto m = ChannelModel::bsc(0.0);
		const SampledBlocks data(m, InputDistribution::uniform(), 200, n_len, 1);
		const auto r = sc_design(ClassicKernels(m), data, 4);
		for (double v : r.mi)
			CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
	}
	{
		const auto m = ChannelModel::bsc(0.5);
		const SampledBlocks data(m, InputDistribution::uniform(), 10000, n_len, 2);
		const auto r = sc_design(ClassicKernels(m), data, 4);
		for (double v : r.mi)
			CHECK(std::abs(v) < 0.05);
	}
	const auto m = ChannelModel::bsc(0.1);
	const SampledBlocks data(m, InputDistribution::uniform(), 10, n_len, 1);
	CHECK_THROWS_AS(sc_design(ClassicKernels(m), data, 9), std::invalid_argument);
}

TEST_CASE("sc_design ranking matches exact bit-channel entropies on BSC(0.1), N=8")
{
	const auto m = ChannelModel::bsc(0.1);
	const std::size_t n_len = 8;
	const auto h = oracle::exact_conditional_entropies(
	    n_len, 2,
	    [&](std::span<const std::uint8_t> x, std::span<const double> y) {
		    double p = 1.0;
		    for (std::size_t t = 0; t < x.size(); ++t)
			    p *= m.transition(y[t], x[t], {});
		    return p;
	    },
	    [](std::span<const std::uint8_t> x) { return oracle::iid_prob(x, 0.5); });
	std::vector<double> exact(n_len);
	for (std::size_t i = 0; i < n_len; ++i)
		exact[i] = 1.0 - h[i];

	const SampledBlocks data(m, InputDistribution::uniform(), 10000, n_len, 21);
	const auto r = sc_design(ClassicKernels(m), data, 4);
	for (std::size_t i = 0; i < n_len; ++i)
		CHECK(std::abs(r.mi[i] - exact[i]) < 0.03);
	for (std::size_t k = 1; k <= n_len; ++k)
		CHECK(top_k(r.mi, k) == top_k(exact, k));
}

TEST_CASE("sc_design is invariant to block order")
{
	const auto m = ChannelModel::bsc(0.1);
	const Dataset data = sample_dataset(m, 300, 16, InputDistribution::uniform(), 4);
	std::vector<std::size_t> order(300);
	for (std::size_t j = 0; j < 300; ++j)
		order[j] = (j * 7 + 3) % 300;
	const PermutedBlocks shuffled(data, order);
	const ClassicKernels k(m);
	const auto a = sc_design(k, data, 5);
	const auto b = sc_design(k, shuffled, 5);
	CHECK(a.info_set == b.info_set);
	CHECK(a.mi == b.mi);
}

TEST_CASE("top_k breaks ties toward the lower index")
{
	const std::vector<double> v{0.5, 0.9, 0.5, 0.9, 0.1};
	CHECK(top_k(v, 1) == std::vector<std::size_t>{1});
	CHECK(top_k(v, 3) == std::vector<std::size_t>{0, 1, 3});
	CHECK(top_k(v, 0).empty());
}

TEST_CASE("sc_design_hy limiting cases")
{
	const auto m = ChannelModel::bsc(0.1);
	const std::size_t n_len = 16;
	{
		const SampledBlocks data(m, InputDistribution::uniform(), 500, n_len, 8);
		const ClassicKernels ky(m);
		const auto hy = sc_design_hy(prior_kernels(0.5), ky, data, 4);
		const auto plain = sc_design(ky, data, 4);
		for (std::size_t i = 0; i < n_len; ++i)
			CHECK(hy.mi[i] == doctest::Approx(plain.mi[i]).epsilon(1e-12));
		CHECK(hy.info_set == plain.info_set);
	}
	{
		// Deterministic all-ones input: zero source entropy everywhere.
		const SampledBlocks data(m, InputDistribution::bernoulli(1.0), 100, n_len, 8);
		const auto kx = prior_kernels(1.0);
		const auto sx = log2_posterior_sums(kx, data);
		for (double s : sx)
			CHECK(std::abs(s / 100.0) < 1e-9);
	}
}

TEST_CASE("sc_design_hy matches the exact two-pass oracle on the asymmetric BEC")
{
	const auto m = ChannelModel::asym_bec(0.4, 0.8159);
	const double q = 9.0 / 16.0;
	const std::size_t n_len = 8;
	auto px = [&](std::span<const std::uint8_t> x) { return oracle::iid_prob(x, q); };
	const auto hy_given_y = oracle::exact_conditional_entropies(
	    n_len, 3,
	    [&](std::span<const std::uint8_t> x, std::span<const double> y) {
		    double p = 1.0;
		    for (std::size_t t = 0; t < x.size(); ++t)
			    p *= m.transition(y[t], x[t], {});
		    return p;
	    },
	    px);
	const auto hx = oracle::exact_source_entropies(n_len, px);

	const SampledBlocks data(m, InputDistribution::bernoulli(q), 10000, n_len, 77);
	const double offset = std::log(q / (1 - q));
	const auto r = sc_design_hy(prior_kernels(q), ClassicKernels(m, offset), data, 3);
	for (std::size_t i = 0; i < n_len; ++i)
		CHECK(std::abs(r.mi[i] - (hx[i] - hy_given_y[i])) < 0.02);
}

TEST_CASE("code spec JSON round trip")
{
	DesignResult d;
	d.info_set = {3, 5, 6, 7};
	d.mi = {0.1, 0.2, 0.3, 0.9, 0.4, 0.95, 0.96, 1.0};
	auto c = CodeSpec::from_design(8, d);
	c.config["channel"] = "bsc:0.1";
	const auto back = CodeSpec::from_json(c.to_json());
	CHECK(back.n_len == 8);
	CHECK(back.info_set == c.info_set);
	CHECK(back.frozen_values == c.frozen_values);
	CHECK(back.mi == c.mi);
	CHECK(back.config == c.config);
	CHECK(back.rate() == 0.5);
	const auto f = back.pattern();
	CHECK(f[3] == FrozenBit::info);
	CHECK(f[0] == FrozenBit::zero);
	CHECK_THROWS_AS(CodeSpec::from_json("{\"N\": 6, \"info_set\": [], \"frozen_values\": []}"),
	                std::invalid_argument);
	CHECK_THROWS_AS(CodeSpec::from_json("not json"), std::invalid_argument);
}
