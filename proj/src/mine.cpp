#include "polarlab/mine.hpp"

#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>

#include "polarlab/util.hpp"

namespace polarlab {

using nn::Matrix;

double dv_objective(std::span<const double> t_joint, std::span<const double> t_marginal)
{
	if (t_joint.empty() || t_marginal.empty())
		throw std::invalid_argument("dv_objective: empty batch");
	long double mean = 0;
	for (double v : t_joint)
		mean += v;
	mean /= static_cast<long double>(t_joint.size());
	const double mx = *std::max_element(t_marginal.begin(), t_marginal.end());
	long double s = 0;
	for (double v : t_marginal)
		s += std::exp(v - mx);
	return static_cast<double>(mean) - (mx + std::log(static_cast<double>(s / static_cast<long double>(t_marginal.size()))));
}

nn::Tape::Var dv_objective(nn::Tape& tape, nn::Tape::Var t_joint, nn::Tape::Var t_marginal)
{
	return tape.sub(tape.mean(t_joint), tape.log_mean_exp(t_marginal));
}

MineModel MineModel::init(std::size_t hidden, Rng& rng)
{
	MineModel m;
	m.t = nn::Mlp({2, hidden, 1}, nn::Activation::tanh, nn::Activation::identity, rng);
	return m;
}

double MineModel::operator()(std::uint8_t x, double y) const
{
	const double in[2] = {static_cast<double>(x), (y - y_shift) / y_scale};
	return t.forward(std::span<const double>(in, 2))[0];
}

nn::Checkpoint MineModel::to_checkpoint() const
{
	nn::Checkpoint c;
	c.kind = "mine";
	c.meta["y_shift"] = format_double(y_shift);
	c.meta["y_scale"] = format_double(y_scale);
	c.meta["channel"] = channel;
	c.meta["mi_bits"] = format_double(mi_bits);
	c.nets.emplace_back("T", t);
	return c;
}

MineModel MineModel::from_checkpoint(const nn::Checkpoint& c)
{
	if (c.kind != "mine")
		throw std::invalid_argument("checkpoint kind '" + c.kind + "' is not a mine model");
	MineModel m;
	m.t = c.net("T");
	if (m.t.input_dim() != 2 || m.t.output_dim() != 1)
		throw std::invalid_argument("mine checkpoint: T must map 2 inputs to 1 output");
	m.y_shift = parse_double(c.get("y_shift"));
	m.y_scale = parse_double(c.get("y_scale"));
	m.channel = c.get("channel");
	m.mi_bits = parse_double(c.get("mi_bits"));
	if (!(m.y_scale > 0.0) || !m.t.all_finite())
		throw std::invalid_argument("mine checkpoint: invalid parameters");
	return m;
}

void shuffle(std::span<std::size_t> v, Rng& rng)
{
	for (std::size_t i = v.size(); i > 1; --i)
		std::swap(v[i - 1], v[rng.below(i)]);
}

namespace {

// Rows (x, standardized y) for the given sample indices, outputs taken
// through `perm` when non-null.
Matrix rows(const MineModel& m, std::span<const std::uint8_t> x, std::span<const double> y,
            std::span<const std::size_t> idx, const std::vector<std::size_t>* perm)
{
	Matrix in(static_cast<Eigen::Index>(idx.size()), 2);
	for (std::size_t r = 0; r < idx.size(); ++r) {
		const std::size_t yi = perm ? idx[(*perm)[r]] : idx[r];
		in(static_cast<Eigen::Index>(r), 0) = x[idx[r]];
		in(static_cast<Eigen::Index>(r), 1) = (y[yi] - m.y_shift) / m.y_scale;
	}
	return in;
}

} // namespace

double mine_estimate_bits(const MineModel& model, std::span<const std::uint8_t> x, std::span<const double> y,
                          std::uint64_t seed)
{
	if (x.size() != y.size() || x.empty())
		throw std::invalid_argument("mine estimate: need equally many inputs and outputs");
	std::vector<std::size_t> idx(x.size()), perm(x.size());
	std::iota(idx.begin(), idx.end(), 0);
	std::iota(perm.begin(), perm.end(), 0);
	Rng rng = Rng::stream(seed, 0x3e57);
	shuffle(perm, rng);
	const Matrix tj = model.t.forward(rows(model, x, y, idx, nullptr));
	const Matrix tm = model.t.forward(rows(model, x, y, idx, &perm));
	return dv_objective({tj.data(), static_cast<std::size_t>(tj.size())},
	                    {tm.data(), static_cast<std::size_t>(tm.size())}) /
	       std::log(2.0);
}

MineModel train_mine(const BlockSource& data, OutputKind kind, const MineConfig& cfg)
{
	if (cfg.batch < 2 || cfg.hidden == 0)
		throw std::invalid_argument("mine: batch must be at least 2 and hidden positive");
	const std::size_t n_len = data.block_length();
	std::size_t total = data.blocks() * n_len;
	if (cfg.max_samples)
		total = std::min(total, cfg.max_samples);
	if (total < 2)
		throw std::invalid_argument("mine: not enough samples");
	std::vector<std::uint8_t> x(data.blocks() * n_len);
	std::vector<double> y(x.size());
	for (std::size_t j = 0; j * n_len < total; ++j)
		data.block(j, std::span<std::uint8_t>(x).subspan(j * n_len, n_len), std::span<double>(y).subspan(j * n_len, n_len));
	x.resize(total);
	y.resize(total);

	Rng init(cfg.seed);
	MineModel m = MineModel::init(cfg.hidden, init);
	if (kind == OutputKind::real) {
		long double s = 0, s2 = 0;
		for (double v : y) {
			s += v;
			s2 += static_cast<long double>(v) * v;
		}
		const double mean = static_cast<double>(s / total);
		const double var = static_cast<double>(s2 / total) - mean * mean;
		m.y_shift = mean;
		m.y_scale = var > 0 ? std::sqrt(var) : 1.0;
	}

	nn::AdamConfig acfg;
	acfg.lr = cfg.lr;
	nn::Adam opt(m.t.parameters(), acfg);
	Rng rng = Rng::stream(cfg.seed, 0x4d1e);
	std::vector<std::size_t> idx(cfg.batch), perm(cfg.batch);
	m.trace.reserve(cfg.iterations);
	nn::Tape tape;
	for (std::size_t it = 0; it < cfg.iterations; ++it) {
		for (auto& i : idx)
			i = rng.below(total);
		std::iota(perm.begin(), perm.end(), 0);
		shuffle(perm, rng);
		tape.clear();
		const auto tj = tape.mlp(tape.input(rows(m, x, y, idx, nullptr)), m.t);
		const auto tm = tape.mlp(tape.input(rows(m, x, y, idx, &perm)), m.t);
		const auto obj = dv_objective(tape, tj, tm);
		const double value = tape.value(obj)(0, 0);
		if (!std::isfinite(value))
			throw std::runtime_error("mine: non-finite objective at iteration " + std::to_string(it));
		opt.zero_grad();
		tape.backward(tape.scale(obj, -1.0));
		opt.step();
		if (!m.t.all_finite())
			throw std::runtime_error("mine: non-finite parameter after iteration " + std::to_string(it));
		m.trace.push_back(value);
	}
	m.mi_bits = mine_estimate_bits(m, x, y, cfg.seed);
	return m;
}

ClassicKernels extract_embedding(const MineModel& model, double prior_offset)
{
	auto shared = std::make_shared<const MineModel>(model);
	return ClassicKernels([shared, prior_offset](double y) {
		const double e = (*shared)(1, y) - (*shared)(0, y) + prior_offset;
		return std::clamp(e, -ClassicKernels::kClamp, ClassicKernels::kClamp);
	});
}

} // namespace polarlab
