#include "polarlab/channels.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "polarlab/util.hpp"

namespace polarlab {

namespace {

void require(bool ok, const std::string& what)
{
	if (!ok)
		throw std::invalid_argument(what);
}

bool is_probability(double v) { return v >= 0.0 && v <= 1.0; }

} // namespace

double normal_density(double z, double sigma2) noexcept
{
	return std::exp(-0.5 * z * z / sigma2) / std::sqrt(2.0 * std::numbers::pi * sigma2);
}

ChannelModel ChannelModel::bsc(double p)
{
	require(is_probability(p), "bsc: crossover probability must lie in [0,1]");
	ChannelModel m;
	m.kind_ = ChannelKind::bsc;
	m.p_ = p;
	return m;
}

ChannelModel ChannelModel::awgn(double sigma2)
{
	require(sigma2 > 0.0 && std::isfinite(sigma2), "awgn: noise variance must be positive");
	ChannelModel m;
	m.kind_ = ChannelKind::awgn;
	m.sigma2_ = sigma2;
	return m;
}

ChannelModel ChannelModel::asym_bec(double eps0, double eps1)
{
	require(is_probability(eps0) && is_probability(eps1),
	        "asymbec: erasure probabilities must lie in [0,1]");
	ChannelModel m;
	m.kind_ = ChannelKind::asym_bec;
	m.eps0_ = eps0;
	m.eps1_ = eps1;
	return m;
}

ChannelModel ChannelModel::ising()
{
	ChannelModel m;
	m.kind_ = ChannelKind::ising;
	return m;
}

ChannelModel ChannelModel::isi(std::vector<double> taps, double sigma2)
{
	require(!taps.empty(), "isi: at least one tap required");
	require(taps.size() <= 17, "isi: memory above 16 is not supported");
	require(sigma2 > 0.0 && std::isfinite(sigma2), "isi: noise variance must be positive");
	ChannelModel m;
	m.kind_ = ChannelKind::isi;
	m.taps_ = std::move(taps);
	m.sigma2_ = sigma2;
	return m;
}

ChannelModel ChannelModel::isi_geometric(int memory, double decay, double sigma2)
{
	require(memory >= 0, "isi: memory must be non-negative");
	std::vector<double> taps(static_cast<std::size_t>(memory) + 1);
	double h = 1.0;
	for (auto& t : taps) {
		t = h;
		h *= decay;
	}
	return isi(std::move(taps), sigma2);
}

ChannelModel ChannelModel::maagn(double alpha, double sigma2)
{
	require(std::isfinite(alpha), "maagn: alpha must be finite");
	require(sigma2 > 0.0 && std::isfinite(sigma2), "maagn: noise variance must be positive");
	ChannelModel m;
	m.kind_ = ChannelKind::maagn;
	m.alpha_ = alpha;
	m.sigma2_ = sigma2;
	return m;
}

ChannelModel ChannelModel::parse(std::string_view descriptor)
{
	const auto colon = descriptor.find(':');
	const std::string_view name = descriptor.substr(0, colon);
	std::vector<double> args;
	if (colon != std::string_view::npos) {
		for (auto field : split(descriptor.substr(colon + 1), ','))
			args.push_back(parse_double(field));
	}
	auto want = [&](std::size_t lo, std::size_t hi) {
		require(args.size() >= lo && args.size() <= hi,
		        "channel '" + std::string(name) + "': wrong number of parameters");
	};
	if (name == "bsc") {
		want(1, 1);
		return bsc(args[0]);
	}
	if (name == "awgn") {
		want(1, 1);
		return awgn(args[0]);
	}
	if (name == "asymbec") {
		want(2, 2);
		return asym_bec(args[0], args[1]);
	}
	if (name == "ising") {
		want(0, 0);
		return ising();
	}
	if (name == "isi") {
		want(3, 3);
		const double m = args[0];
		require(m >= 0 && m == std::floor(m), "isi: memory must be a non-negative integer");
		return isi_geometric(static_cast<int>(m), args[1], args[2]);
	}
	if (name == "isitaps") {
		require(args.size() >= 2, "isitaps: expected taps followed by the noise variance");
		const double sigma2 = args.back();
		args.pop_back();
		return isi(std::move(args), sigma2);
	}
	if (name == "maagn") {
		want(2, 2);
		return maagn(args[0], args[1]);
	}
	throw std::invalid_argument("unknown channel '" + std::string(name) + "'");
}

std::string ChannelModel::descriptor() const
{
	switch (kind_) {
	case ChannelKind::bsc:
		return "bsc:" + format_double(p_);
	case ChannelKind::awgn:
		return "awgn:" + format_double(sigma2_);
	case ChannelKind::asym_bec:
		return "asymbec:" + format_double(eps0_) + "," + format_double(eps1_);
	case ChannelKind::ising:
		return "ising";
	case ChannelKind::isi: {
		// Geometric taps round-trip through the short form.
		const double decay = taps_.size() > 1 ? taps_[1] : 0.0;
		bool geometric = true;
		double h = 1.0;
		for (double t : taps_) {
			geometric = geometric && t == h;
			h *= decay;
		}
		if (geometric)
			return "isi:" + std::to_string(memory()) + "," + format_double(decay) + "," +
			       format_double(sigma2_);
		std::string s = "isitaps:";
		for (double t : taps_)
			s += format_double(t) + ",";
		return s + format_double(sigma2_);
	}
	case ChannelKind::maagn:
		return "maagn:" + format_double(alpha_) + "," + format_double(sigma2_);
	}
	return {};
}

OutputKind ChannelModel::output_kind() const noexcept
{
	switch (kind_) {
	case ChannelKind::bsc:
	case ChannelKind::ising:
		return OutputKind::binary;
	case ChannelKind::asym_bec:
		return OutputKind::ternary;
	default:
		return OutputKind::real;
	}
}

bool ChannelModel::has_memory() const noexcept
{
	switch (kind_) {
	case ChannelKind::ising:
	case ChannelKind::maagn:
		return true;
	case ChannelKind::isi:
		return memory() > 0;
	default:
		return false;
	}
}

int ChannelModel::alphabet_size() const noexcept
{
	switch (output_kind()) {
	case OutputKind::binary:
		return 2;
	case OutputKind::ternary:
		return 3;
	case OutputKind::real:
		return 0;
	}
	return 0;
}

double ChannelModel::isi_mean(std::uint8_t x, std::uint32_t history) const noexcept
{
	double mean = taps_[0] * bpsk(x);
	for (std::size_t i = 1; i < taps_.size(); ++i)
		mean += taps_[i] * bpsk(static_cast<std::uint8_t>((history >> (i - 1)) & 1u));
	return mean;
}

double ChannelModel::transition(double y, std::uint8_t x, const ChannelState& state) const noexcept
{
	switch (kind_) {
	case ChannelKind::bsc: {
		const bool flipped = static_cast<std::uint8_t>(y) != x;
		return flipped ? p_ : 1.0 - p_;
	}
	case ChannelKind::awgn:
		return normal_density(y - bpsk(x), sigma2_);
	case ChannelKind::asym_bec: {
		const double eps = x ? eps1_ : eps0_;
		const auto sym = static_cast<std::uint8_t>(y);
		if (sym == kErasure)
			return eps;
		return sym == x ? 1.0 - eps : 0.0;
	}
	case ChannelKind::ising: {
		const auto sym = static_cast<std::uint8_t>(y);
		return 0.5 * (sym == x) + 0.5 * (sym == state.ising_s);
	}
	case ChannelKind::isi:
		return normal_density(y - isi_mean(x, state.isi_history), sigma2_);
	case ChannelKind::maagn:
		return normal_density(y - bpsk(x) - alpha_ * state.ma_z_prev, sigma2_);
	}
	return 0.0;
}

ChannelState ChannelModel::next_state(const ChannelState& state, std::uint8_t x,
                                      double y) const noexcept
{
	ChannelState next = state;
	switch (kind_) {
	case ChannelKind::ising:
		next.ising_s = x;
		break;
	case ChannelKind::isi: {
		const int m = memory();
		if (m > 0) {
			const std::uint32_t mask = (m >= 32) ? ~0u : ((1u << m) - 1u);
			next.isi_history = ((state.isi_history << 1) | x) & mask;
		}
		break;
	}
	case ChannelKind::maagn:
		next.ma_z_prev = y - bpsk(x) - alpha_ * state.ma_z_prev;
		break;
	default:
		break;
	}
	return next;
}

double ChannelModel::sample(std::uint8_t x, ChannelState& state, Rng& rng) const
{
	double y = 0.0;
	switch (kind_) {
	case ChannelKind::bsc:
		y = static_cast<double>(x ^ static_cast<std::uint8_t>(rng.bernoulli(p_)));
		break;
	case ChannelKind::awgn:
		y = bpsk(x) + std::sqrt(sigma2_) * rng.gaussian();
		break;
	case ChannelKind::asym_bec:
		y = rng.bernoulli(x ? eps1_ : eps0_) ? kErasure : x;
		break;
	case ChannelKind::ising:
		y = rng.bernoulli(0.5) ? x : state.ising_s;
		break;
	case ChannelKind::isi:
		y = isi_mean(x, state.isi_history) + std::sqrt(sigma2_) * rng.gaussian();
		break;
	case ChannelKind::maagn: {
		const double z = std::sqrt(sigma2_) * rng.gaussian();
		y = bpsk(x) + z + alpha_ * state.ma_z_prev;
		break;
	}
	}
	state = next_state(state, x, y);
	return y;
}

void ChannelModel::sample_block(std::span<const std::uint8_t> x, std::span<double> y,
                                ChannelState& state, Rng& rng) const
{
	if (x.size() != y.size())
		throw std::invalid_argument("sample_block: input and output lengths differ");
	for (std::size_t t = 0; t < x.size(); ++t)
		y[t] = sample(x[t], state, rng);
}

} // namespace polarlab
