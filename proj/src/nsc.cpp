#include "polarlab/nsc.hpp"

#include <cmath>
#include <stdexcept>

#include "polarlab/util.hpp"

namespace polarlab {

using nn::Matrix;
using Var = nn::Tape::Var;

namespace {

struct Shapes
{
	std::vector<std::size_t> e, f, g, h;
};

Shapes shapes(const NscArchitecture& a)
{
	if (a.d == 0 || a.hidden == 0)
		throw std::invalid_argument("nsc: embedding and hidden sizes must be positive");
	return {{1, a.hidden, a.d}, {2 * a.d, a.hidden, a.d}, {2 * a.d + 1, a.hidden, a.d}, {a.d, a.hidden, 1}};
}

} // namespace

// ---------------------------------------------------------------------------
// Model

NscModel::NscModel(const NscArchitecture& arch, Rng& rng, bool with_prior) : has_prior(with_prior), arch_(arch)
{
	const auto s = shapes(arch);
	e = nn::Mlp(s.e, arch.activation, nn::Activation::identity, rng);
	f = nn::Mlp(s.f, arch.activation, nn::Activation::identity, rng);
	g = nn::Mlp(s.g, arch.activation, nn::Activation::identity, rng);
	h = nn::Mlp(s.h, arch.activation, nn::Activation::logistic, rng);
	e_x = nn::Parameter(Matrix::Zero(1, static_cast<Eigen::Index>(arch.d)));
}

NscModel NscModel::zeros(const NscArchitecture& arch, bool with_prior)
{
	Rng rng(0);
	NscModel m(arch, rng, with_prior);
	const auto s = shapes(arch);
	m.e = nn::Mlp::zeros(s.e, arch.activation, nn::Activation::identity);
	m.f = nn::Mlp::zeros(s.f, arch.activation, nn::Activation::identity);
	m.g = nn::Mlp::zeros(s.g, arch.activation, nn::Activation::identity);
	m.h = nn::Mlp::zeros(s.h, arch.activation, nn::Activation::logistic);
	return m;
}

std::vector<nn::Parameter*> NscModel::parameters()
{
	std::vector<nn::Parameter*> p;
	for (auto* net : {&e, &f, &g, &h})
		for (auto* q : net->parameters())
			p.push_back(q);
	if (has_prior)
		p.push_back(&e_x);
	return p;
}

bool NscModel::all_finite() const
{
	return e.all_finite() && f.all_finite() && g.all_finite() && h.all_finite() && e_x.value.allFinite();
}

bool operator==(const NscModel& a, const NscModel& b)
{
	return a.e == b.e && a.f == b.f && a.g == b.g && a.h == b.h && a.has_prior == b.has_prior &&
	       a.e_x.value == b.e_x.value && a.y_shift == b.y_shift && a.y_scale == b.y_scale;
}

nn::Checkpoint NscModel::to_checkpoint() const
{
	nn::Checkpoint c;
	c.kind = has_prior ? "nsc-hy" : "nsc";
	c.meta["d"] = std::to_string(arch_.d);
	c.meta["hidden"] = std::to_string(arch_.hidden);
	c.meta["activation"] = nn::to_string(arch_.activation);
	c.meta["y_shift"] = format_double(y_shift);
	c.meta["y_scale"] = format_double(y_scale);
	c.meta["channel"] = channel;
	c.nets.emplace_back("E", e);
	c.nets.emplace_back("F", f);
	c.nets.emplace_back("G", g);
	c.nets.emplace_back("H", h);
	if (has_prior) {
		const auto& v = e_x.value;
		c.vectors.emplace_back("e_x", std::vector<double>(v.data(), v.data() + v.size()));
	}
	return c;
}

NscModel NscModel::from_checkpoint(const nn::Checkpoint& c)
{
	if (c.kind != "nsc" && c.kind != "nsc-hy")
		throw std::invalid_argument("checkpoint kind '" + c.kind + "' is not an nsc model");
	NscArchitecture arch;
	arch.d = std::stoul(c.get("d"));
	arch.hidden = std::stoul(c.get("hidden"));
	arch.activation = nn::parse_activation(c.get("activation"));
	NscModel m = zeros(arch, c.kind == "nsc-hy");
	m.e.assign(c.net("E"));
	m.f.assign(c.net("F"));
	m.g.assign(c.net("G"));
	m.h.assign(c.net("H"));
	m.y_shift = parse_double(c.get("y_shift"));
	m.y_scale = parse_double(c.get("y_scale"));
	m.channel = c.get("channel");
	if (m.has_prior) {
		const auto& v = c.vec("e_x");
		if (v.size() != arch.d)
			throw std::invalid_argument("nsc checkpoint: e_x has the wrong length");
		std::copy(v.begin(), v.end(), m.e_x.value.data());
	}
	if (!(m.y_scale > 0.0) || !m.all_finite())
		throw std::invalid_argument("nsc checkpoint: invalid parameters");
	return m;
}

void fit_standardization(NscModel& model, const BlockSource& data, OutputKind kind, std::size_t max_blocks)
{
	model.y_shift = 0.0;
	model.y_scale = 1.0;
	if (kind != OutputKind::real)
		return;
	const std::size_t nb = std::min(data.blocks(), max_blocks);
	const std::size_t n_len = data.block_length();
	std::vector<std::uint8_t> x(n_len);
	std::vector<double> y(n_len);
	long double s = 0, s2 = 0;
	for (std::size_t j = 0; j < nb; ++j) {
		data.block(j, x, y);
		for (double v : y) {
			s += v;
			s2 += static_cast<long double>(v) * v;
		}
	}
	const long double cnt = static_cast<long double>(nb * n_len);
	if (cnt == 0)
		return;
	const double mean = static_cast<double>(s / cnt);
	const double var = static_cast<double>(s2 / cnt) - mean * mean;
	model.y_shift = mean;
	model.y_scale = var > 0 ? std::sqrt(var) : 1.0;
}

// ---------------------------------------------------------------------------
// Loss

Var nsc_embed(nn::Tape& tape, NscModel& model, std::span<const double> y)
{
	Matrix in(static_cast<Eigen::Index>(y.size()), 1);
	for (std::size_t i = 0; i < y.size(); ++i)
		in(static_cast<Eigen::Index>(i), 0) = model.e_input(y[i]);
	return tape.mlp(tape.input(std::move(in)), model.e);
}

Var nsc_prior_embed(nn::Tape& tape, NscModel& model, std::size_t rows)
{
	if (!model.has_prior)
		throw std::invalid_argument("nsc model has no input-prior embedding");
	return tape.broadcast_row(tape.param(model.e_x), rows);
}

NscLoss nsc_loss(nn::Tape& tape, NscModel& model, Var e0, std::span<const std::uint8_t> u, std::size_t blocks,
                 bool leaves_only)
{
	if (blocks == 0 || u.size() % blocks != 0)
		throw std::invalid_argument("nsc_loss: bits do not split into whole blocks");
	const std::size_t n_len = u.size() / blocks;
	const int n = exact_log2(n_len);
	if (static_cast<std::size_t>(tape.value(e0).rows()) != u.size() ||
	    static_cast<std::size_t>(tape.value(e0).cols()) != model.dim())
		throw std::invalid_argument("nsc_loss: embeddings and bits have mismatched lengths");

	// targets[k][b*N + p]: bit p of encode(u[qL, (q+1)L)) at depth k, q = p / L.
	std::vector<std::vector<std::uint8_t>> targets(n + 1, std::vector<std::uint8_t>(u.begin(), u.end()));
	for (int k = 0; k <= n; ++k) {
		const std::size_t len = n_len >> k;
		for (std::size_t off = 0; off < u.size(); off += len)
			encode_inplace(std::span<std::uint8_t>(targets[k]).subspan(off, len));
	}

	std::vector<Var> levels{e0};
	const std::size_t half_rows = u.size() / 2;
	for (int k = 0; k < n; ++k) {
		const std::size_t len = n_len >> k;
		const std::size_t half = len / 2;
		std::vector<std::size_t> even, odd, order(u.size());
		Matrix bits(static_cast<Eigen::Index>(half_rows), 1);
		even.reserve(half_rows);
		odd.reserve(half_rows);
		for (std::size_t base = 0; base < u.size(); base += len) {
			for (std::size_t j = 0; j < half; ++j) {
				bits(static_cast<Eigen::Index>(even.size()), 0) = targets[k + 1][base + j] ? -1.0 : 1.0;
				even.push_back(base + 2 * j);
				odd.push_back(base + 2 * j + 1);
			}
		}
		// Child rows come out as [all C children | all B children], each
		// ordered like `even`; interleave them back to per-node order.
		for (std::size_t base = 0, r = 0; base < u.size(); base += len, r += half) {
			for (std::size_t j = 0; j < half; ++j) {
				order[base + j] = r + j;
				order[base + half + j] = half_rows + r + j;
			}
		}
		const Var cur = levels.back();
		const Var pairs = tape.concat_cols({tape.gather_rows(cur, std::move(even)), tape.gather_rows(cur, std::move(odd))});
		const Var c = tape.mlp(pairs, model.f);
		const Var b = tape.mlp(tape.concat_cols({pairs, tape.input(std::move(bits))}), model.g);
		levels.push_back(tape.gather_rows(tape.concat_rows({c, b}), std::move(order)));
	}

	std::vector<double> t;
	NscLoss out;
	Var stacked;
	if (leaves_only) {
		stacked = levels.back();
		t.assign(targets[n].begin(), targets[n].end());
		out.terms = n_len;
	} else {
		stacked = tape.concat_rows(levels);
		t.reserve(u.size() * (n + 1));
		for (const auto& tk : targets)
			t.insert(t.end(), tk.begin(), tk.end());
		out.terms = n_len * static_cast<std::size_t>(n + 1);
	}
	out.probs = tape.mlp(stacked, model.h);
	out.loss = tape.scale(tape.bce_sum(out.probs, std::move(t)), 1.0 / static_cast<double>(blocks));
	return out;
}

// ---------------------------------------------------------------------------
// Training

namespace {

NscTrainResult train_impl(NscModel model, const BlockSource& data, const NscTrainConfig& cfg, bool hy)
{
	if (cfg.n_t < 1 || cfg.n_t > 20)
		throw std::invalid_argument("nsc training: n_t must be in [1, 20]");
	const std::size_t nt_len = std::size_t{1} << cfg.n_t;
	const std::size_t n_len = data.block_length();
	if (nt_len > n_len)
		throw std::invalid_argument("nsc training: 2^n_t exceeds the dataset block length");
	if (data.blocks() == 0 || cfg.batch == 0)
		throw std::invalid_argument("nsc training: empty dataset or batch");
	if (hy && !model.has_prior)
		throw std::invalid_argument("nsc hy training needs a model with an input-prior embedding");

	Rng rng = Rng::stream(cfg.seed, 0x5a3b1e);
	const std::size_t windows = n_len / nt_len;
	std::vector<std::uint8_t> x(n_len), u(cfg.batch * nt_len);
	std::vector<double> y(n_len), yw(cfg.batch * nt_len);

	NscTrainResult result{std::move(model), {}};
	NscModel& m = result.model;
	nn::AdamConfig acfg;
	acfg.lr = cfg.lr;
	nn::Adam opt(m.parameters(), acfg);
	result.loss_trace.reserve(cfg.iterations);
	nn::Tape tape;
	for (std::size_t it = 0; it < cfg.iterations; ++it) {
		for (std::size_t b = 0; b < cfg.batch; ++b) {
			const std::size_t j = rng.below(data.blocks());
			const std::size_t off = windows > 1 ? rng.below(windows) * nt_len : 0;
			data.block(j, x, y);
			std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(off), nt_len, u.begin() + static_cast<std::ptrdiff_t>(b * nt_len));
			std::copy_n(y.begin() + static_cast<std::ptrdiff_t>(off), nt_len, yw.begin() + static_cast<std::ptrdiff_t>(b * nt_len));
			encode_inplace(std::span<std::uint8_t>(u).subspan(b * nt_len, nt_len));
		}
		tape.clear();
		Var loss = nsc_loss(tape, m, nsc_embed(tape, m, yw), u, cfg.batch, cfg.leaves_only).loss;
		if (hy)
			loss = tape.add(loss, nsc_loss(tape, m, nsc_prior_embed(tape, m, u.size()), u, cfg.batch, cfg.leaves_only).loss);
		const double value = tape.value(loss)(0, 0);
		if (!std::isfinite(value))
			throw std::runtime_error("nsc training: non-finite loss at iteration " + std::to_string(it));
		opt.zero_grad();
		tape.backward(loss);
		opt.step();
		if (!m.all_finite())
			throw std::runtime_error("nsc training: non-finite parameter after iteration " + std::to_string(it));
		result.loss_trace.push_back(value);
	}
	return result;
}

NscModel initial_model(const BlockSource& data, OutputKind kind, const NscTrainConfig& cfg, bool hy)
{
	Rng rng(cfg.seed);
	NscModel m(cfg.arch, rng, hy);
	fit_standardization(m, data, kind);
	return m;
}

} // namespace

NscTrainResult train_nsc(NscModel model, const BlockSource& data, const NscTrainConfig& cfg)
{
	return train_impl(std::move(model), data, cfg, false);
}

NscTrainResult train_nsc(const BlockSource& data, OutputKind kind, const NscTrainConfig& cfg)
{
	return train_impl(initial_model(data, kind, cfg, false), data, cfg, false);
}

NscTrainResult train_nsc_hy(NscModel model, const BlockSource& data, const NscTrainConfig& cfg)
{
	return train_impl(std::move(model), data, cfg, true);
}

NscTrainResult train_nsc_hy(const BlockSource& data, OutputKind kind, const NscTrainConfig& cfg)
{
	return train_impl(initial_model(data, kind, cfg, true), data, cfg, true);
}

// ---------------------------------------------------------------------------
// KernelSet adapter

NeuralKernels::NeuralKernels(const NscModel& model, Pass pass) : model_(model), pass_(pass)
{
	if (pass == Pass::prior && !model.has_prior)
		throw std::invalid_argument("nsc model has no input-prior embedding");
}

namespace {

void copy_out(const Matrix& m, std::span<double> out)
{
	if (static_cast<std::size_t>(m.size()) != out.size())
		throw std::invalid_argument("nsc kernel output has the wrong size");
	std::copy(m.data(), m.data() + m.size(), out.begin());
}

} // namespace

void NeuralKernels::embed(std::span<const double> y, std::span<double> out) const
{
	const std::size_t d = dim();
	if (out.size() != y.size() * d)
		throw std::invalid_argument("nsc embed: output has the wrong size");
	if (pass_ == Pass::prior) {
		for (std::size_t i = 0; i < y.size(); ++i)
			std::copy_n(model_.e_x.value.data(), d, out.begin() + static_cast<std::ptrdiff_t>(i * d));
		return;
	}
	Matrix in(static_cast<Eigen::Index>(y.size()), 1);
	for (std::size_t i = 0; i < y.size(); ++i)
		in(static_cast<Eigen::Index>(i), 0) = model_.e_input(y[i]);
	copy_out(model_.e.forward(in), out);
	macs_.fetch_add(y.size() * model_.e.macs_per_row(), std::memory_order_relaxed);
}

void NeuralKernels::check(std::span<const double> pairs, std::span<double> out) const
{
	const std::size_t d = dim();
	const std::size_t n = out.size() / d;
	if (pairs.size() != 2 * n * d)
		throw std::invalid_argument("nsc check: operand count mismatch");
	const Matrix in = Eigen::Map<const Matrix>(pairs.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(2 * d));
	copy_out(model_.f.forward(in), out);
	macs_.fetch_add(n * model_.f.macs_per_row(), std::memory_order_relaxed);
}

void NeuralKernels::bit(std::span<const double> pairs, std::span<const std::uint8_t> u,
                        std::span<double> out) const
{
	const std::size_t d = dim();
	const std::size_t n = out.size() / d;
	if (pairs.size() != 2 * n * d || u.size() != n)
		throw std::invalid_argument("nsc bit: operand count mismatch");
	Matrix in(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(2 * d + 1));
	in.leftCols(static_cast<Eigen::Index>(2 * d)) =
	    Eigen::Map<const Matrix>(pairs.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(2 * d));
	for (std::size_t j = 0; j < n; ++j)
		in(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(2 * d)) = u[j] ? -1.0 : 1.0;
	copy_out(model_.g.forward(in), out);
	macs_.fetch_add(n * model_.g.macs_per_row(), std::memory_order_relaxed);
}

double NeuralKernels::soft(std::span<const double> e) const
{
	macs_.fetch_add(model_.h.macs_per_row(), std::memory_order_relaxed);
	return model_.h.forward(e)[0];
}

} // namespace polarlab
