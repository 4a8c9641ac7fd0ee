#include "polarlab/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "polarlab/util.hpp"

namespace polarlab::nn {

Activation parse_activation(const std::string& s)
{
	if (s == "identity")
		return Activation::identity;
	if (s == "relu")
		return Activation::relu;
	if (s == "tanh")
		return Activation::tanh;
	if (s == "logistic")
		return Activation::logistic;
	throw std::invalid_argument("unknown activation '" + s + "'");
}

std::string to_string(Activation a)
{
	switch (a) {
	case Activation::identity:
		return "identity";
	case Activation::relu:
		return "relu";
	case Activation::tanh:
		return "tanh";
	case Activation::logistic:
		return "logistic";
	}
	return "?";
}

void apply_activation(Matrix& m, Activation a)
{
	switch (a) {
	case Activation::identity:
		break;
	case Activation::relu:
		m = m.cwiseMax(0.0);
		break;
	case Activation::tanh:
		m = m.array().tanh().matrix();
		break;
	case Activation::logistic:
		m = m.unaryExpr([](double z) {
			if (z >= 0)
				return 1.0 / (1.0 + std::exp(-z));
			const double e = std::exp(z);
			return e / (1.0 + e);
		});
		break;
	}
}

// ---------------------------------------------------------------------------
// Mlp

Mlp::Mlp(const std::vector<std::size_t>& dims, Activation hidden, Activation output, Rng& rng)
    : Mlp(zeros(dims, hidden, output))
{
	for (auto& l : layers_) {
		const double bound = std::sqrt(6.0 / static_cast<double>(l.in_dim()));
		for (Eigen::Index i = 0; i < l.w.value.size(); ++i)
			l.w.value.data()[i] = bound * (2.0 * rng.uniform() - 1.0);
	}
}

Mlp Mlp::zeros(const std::vector<std::size_t>& dims, Activation hidden, Activation output)
{
	if (dims.size() < 2)
		throw std::invalid_argument("mlp needs at least input and output dimensions");
	for (auto d : dims)
		if (d == 0)
			throw std::invalid_argument("mlp dimensions must be positive");
	Mlp net;
	for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
		Layer l;
		l.w = Parameter(Matrix::Zero(static_cast<Eigen::Index>(dims[i + 1]), static_cast<Eigen::Index>(dims[i])));
		l.b = Parameter(Matrix::Zero(1, static_cast<Eigen::Index>(dims[i + 1])));
		l.act = (i + 2 == dims.size()) ? output : hidden;
		net.layers_.push_back(std::move(l));
	}
	return net;
}

std::size_t Mlp::input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
std::size_t Mlp::output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }

std::vector<std::size_t> Mlp::dims() const
{
	std::vector<std::size_t> d;
	if (layers_.empty())
		return d;
	d.push_back(input_dim());
	for (const auto& l : layers_)
		d.push_back(l.out_dim());
	return d;
}

Matrix Mlp::forward(const Matrix& x) const
{
	if (static_cast<std::size_t>(x.cols()) != input_dim())
		throw std::invalid_argument("mlp input has the wrong dimension");
	Matrix h = x;
	for (const auto& l : layers_) {
		Matrix z = h * l.w.value.transpose();
		z.rowwise() += l.b.value.row(0);
		apply_activation(z, l.act);
		h = std::move(z);
	}
	return h;
}

std::vector<double> Mlp::forward(std::span<const double> x) const
{
	Matrix in(1, static_cast<Eigen::Index>(x.size()));
	std::copy(x.begin(), x.end(), in.data());
	const Matrix out = forward(in);
	return {out.data(), out.data() + out.size()};
}

std::vector<Parameter*> Mlp::parameters()
{
	std::vector<Parameter*> p;
	for (auto& l : layers_) {
		p.push_back(&l.w);
		p.push_back(&l.b);
	}
	return p;
}

std::size_t Mlp::parameter_count() const
{
	std::size_t n = 0;
	for (const auto& l : layers_)
		n += static_cast<std::size_t>(l.w.value.size() + l.b.value.size());
	return n;
}

std::size_t Mlp::macs_per_row() const
{
	std::size_t n = 0;
	for (const auto& l : layers_)
		n += static_cast<std::size_t>(l.w.value.size());
	return n;
}

void Mlp::zero_grad()
{
	for (auto* p : parameters())
		p->zero_grad();
}

bool Mlp::all_finite() const
{
	for (const auto& l : layers_)
		if (!l.w.value.allFinite() || !l.b.value.allFinite())
			return false;
	return true;
}

void Mlp::assign(const Mlp& other)
{
	if (other.dims() != dims())
		throw std::invalid_argument("mlp architectures differ");
	for (std::size_t i = 0; i < layers_.size(); ++i) {
		if (layers_[i].act != other.layers_[i].act)
			throw std::invalid_argument("mlp activations differ");
		layers_[i].w.value = other.layers_[i].w.value;
		layers_[i].b.value = other.layers_[i].b.value;
	}
}

bool operator==(const Mlp& a, const Mlp& b)
{
	if (a.dims() != b.dims())
		return false;
	for (std::size_t i = 0; i < a.layers_.size(); ++i) {
		const auto& la = a.layers_[i];
		const auto& lb = b.layers_[i];
		if (la.act != lb.act || la.w.value != lb.w.value || la.b.value != lb.b.value)
			return false;
	}
	return true;
}

// ---------------------------------------------------------------------------
// Tape

Tape::Var Tape::push(Matrix value, std::function<void(Tape&, std::size_t)> back)
{
	Node n;
	n.grad = Matrix::Zero(value.rows(), value.cols());
	n.value = std::move(value);
	n.back = std::move(back);
	nodes_.push_back(std::move(n));
	return nodes_.size() - 1;
}

Matrix& Tape::g(Var v) { return nodes_[v].grad; }

Tape::Var Tape::input(Matrix value) { return push(std::move(value), nullptr); }

Tape::Var Tape::param(Parameter& p)
{
	return push(p.value, [&p](Tape& t, std::size_t self) { p.grad += t.g(self); });
}

Tape::Var Tape::linear(Var x, Layer& layer)
{
	const Matrix& xv = value(x);
	if (static_cast<std::size_t>(xv.cols()) != layer.in_dim())
		throw std::invalid_argument("linear: input has the wrong dimension");
	Matrix z = xv * layer.w.value.transpose();
	z.rowwise() += layer.b.value.row(0);
	return push(std::move(z), [x, &layer](Tape& t, std::size_t self) {
		const Matrix& gy = t.g(self);
		layer.w.grad.noalias() += gy.transpose() * t.value(x);
		layer.b.grad += gy.colwise().sum();
		t.g(x).noalias() += gy * layer.w.value;
	});
}

Tape::Var Tape::activate(Var x, Activation a)
{
	Matrix y = value(x);
	apply_activation(y, a);
	if (a == Activation::identity)
		return push(std::move(y), [x](Tape& t, std::size_t self) { t.g(x) += t.g(self); });
	return push(std::move(y), [x, a](Tape& t, std::size_t self) {
		const Matrix& yv = t.value(self);
		const Matrix& gy = t.g(self);
		switch (a) {
		case Activation::relu:
			t.g(x).array() += gy.array() * (yv.array() > 0.0).cast<double>();
			break;
		case Activation::tanh:
			t.g(x).array() += gy.array() * (1.0 - yv.array().square());
			break;
		case Activation::logistic:
			t.g(x).array() += gy.array() * yv.array() * (1.0 - yv.array());
			break;
		case Activation::identity:
			break;
		}
	});
}

Tape::Var Tape::mlp(Var x, Mlp& net)
{
	Var h = x;
	for (auto& l : net.layers())
		h = activate(linear(h, l), l.act);
	return h;
}

Tape::Var Tape::add(Var a, Var b)
{
	if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols())
		throw std::invalid_argument("add: shape mismatch");
	return push(value(a) + value(b), [a, b](Tape& t, std::size_t self) {
		t.g(a) += t.g(self);
		t.g(b) += t.g(self);
	});
}

Tape::Var Tape::sub(Var a, Var b)
{
	if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols())
		throw std::invalid_argument("sub: shape mismatch");
	return push(value(a) - value(b), [a, b](Tape& t, std::size_t self) {
		t.g(a) += t.g(self);
		t.g(b) -= t.g(self);
	});
}

Tape::Var Tape::scale(Var a, double s)
{
	return push(value(a) * s, [a, s](Tape& t, std::size_t self) { t.g(a) += s * t.g(self); });
}

Tape::Var Tape::concat_cols(const std::vector<Var>& parts)
{
	if (parts.empty())
		throw std::invalid_argument("concat_cols: nothing to concatenate");
	const Eigen::Index rows = value(parts[0]).rows();
	Eigen::Index cols = 0;
	for (auto p : parts) {
		if (value(p).rows() != rows)
			throw std::invalid_argument("concat_cols: row counts differ");
		cols += value(p).cols();
	}
	Matrix out(rows, cols);
	Eigen::Index c = 0;
	for (auto p : parts) {
		out.middleCols(c, value(p).cols()) = value(p);
		c += value(p).cols();
	}
	return push(std::move(out), [parts](Tape& t, std::size_t self) {
		Eigen::Index c = 0;
		for (auto p : parts) {
			const Eigen::Index w = t.value(p).cols();
			t.g(p) += t.g(self).middleCols(c, w);
			c += w;
		}
	});
}

Tape::Var Tape::concat_rows(const std::vector<Var>& parts)
{
	if (parts.empty())
		throw std::invalid_argument("concat_rows: nothing to concatenate");
	const Eigen::Index cols = value(parts[0]).cols();
	Eigen::Index rows = 0;
	for (auto p : parts) {
		if (value(p).cols() != cols)
			throw std::invalid_argument("concat_rows: column counts differ");
		rows += value(p).rows();
	}
	Matrix out(rows, cols);
	Eigen::Index r = 0;
	for (auto p : parts) {
		out.middleRows(r, value(p).rows()) = value(p);
		r += value(p).rows();
	}
	return push(std::move(out), [parts](Tape& t, std::size_t self) {
		Eigen::Index r = 0;
		for (auto p : parts) {
			const Eigen::Index h = t.value(p).rows();
			t.g(p) += t.g(self).middleRows(r, h);
			r += h;
		}
	});
}

Tape::Var Tape::gather_rows(Var x, std::vector<std::size_t> rows)
{
	const Matrix& xv = value(x);
	Matrix out(static_cast<Eigen::Index>(rows.size()), xv.cols());
	for (std::size_t i = 0; i < rows.size(); ++i) {
		if (rows[i] >= static_cast<std::size_t>(xv.rows()))
			throw std::out_of_range("gather_rows: index out of range");
		out.row(static_cast<Eigen::Index>(i)) = xv.row(static_cast<Eigen::Index>(rows[i]));
	}
	return push(std::move(out), [x, rows = std::move(rows)](Tape& t, std::size_t self) {
		Matrix& gx = t.g(x);
		const Matrix& gy = t.g(self);
		for (std::size_t i = 0; i < rows.size(); ++i)
			gx.row(static_cast<Eigen::Index>(rows[i])) += gy.row(static_cast<Eigen::Index>(i));
	});
}

Tape::Var Tape::broadcast_row(Var row, std::size_t rows)
{
	const Matrix& rv = value(row);
	if (rv.rows() != 1)
		throw std::invalid_argument("broadcast_row: expected a single row");
	Matrix out = rv.replicate(static_cast<Eigen::Index>(rows), 1);
	return push(std::move(out), [row](Tape& t, std::size_t self) { t.g(row) += t.g(self).colwise().sum(); });
}

Tape::Var Tape::sum(Var x)
{
	Matrix out(1, 1);
	out(0, 0) = value(x).sum();
	return push(std::move(out), [x](Tape& t, std::size_t self) { t.g(x).array() += t.g(self)(0, 0); });
}

Tape::Var Tape::mean(Var x)
{
	const double n = static_cast<double>(value(x).size());
	if (n == 0)
		throw std::invalid_argument("mean of an empty matrix");
	Matrix out(1, 1);
	out(0, 0) = value(x).sum() / n;
	return push(std::move(out), [x, n](Tape& t, std::size_t self) { t.g(x).array() += t.g(self)(0, 0) / n; });
}

Tape::Var Tape::log_mean_exp(Var x)
{
	const Matrix& xv = value(x);
	if (xv.size() == 0)
		throw std::invalid_argument("log_mean_exp of an empty matrix");
	const double mx = xv.maxCoeff();
	const double s = (xv.array() - mx).exp().sum();
	Matrix out(1, 1);
	out(0, 0) = mx + std::log(s / static_cast<double>(xv.size()));
	return push(std::move(out), [x, mx, s](Tape& t, std::size_t self) {
		// d/dx_i = softmax_i
		t.g(x).array() += t.g(self)(0, 0) * (t.value(x).array() - mx).exp() / s;
	});
}

Tape::Var Tape::bce_sum(Var p, std::vector<double> targets)
{
	const Matrix& pv = value(p);
	if (pv.cols() != 1 || static_cast<std::size_t>(pv.rows()) != targets.size())
		throw std::invalid_argument("bce_sum: expected an R x 1 column matching the targets");
	double loss = 0.0;
	for (std::size_t i = 0; i < targets.size(); ++i) {
		const double q = std::clamp(pv(static_cast<Eigen::Index>(i), 0), kBceClamp, 1.0 - kBceClamp);
		loss -= targets[i] * std::log(q) + (1.0 - targets[i]) * std::log(1.0 - q);
	}
	Matrix out(1, 1);
	out(0, 0) = loss;
	return push(std::move(out), [p, targets = std::move(targets)](Tape& t, std::size_t self) {
		const double gs = t.g(self)(0, 0);
		const Matrix& pv = t.value(p);
		Matrix& gp = t.g(p);
		for (std::size_t i = 0; i < targets.size(); ++i) {
			const auto r = static_cast<Eigen::Index>(i);
			const double q = std::clamp(pv(r, 0), kBceClamp, 1.0 - kBceClamp);
			gp(r, 0) += gs * (-targets[i] / q + (1.0 - targets[i]) / (1.0 - q));
		}
	});
}

void Tape::backward(Var out)
{
	if (out >= nodes_.size() || nodes_[out].value.size() != 1)
		throw std::invalid_argument("backward needs a scalar node recorded on this tape");
	for (auto& n : nodes_)
		n.grad.setZero();
	nodes_[out].grad(0, 0) = 1.0;
	for (std::size_t i = out + 1; i-- > 0;)
		if (nodes_[i].back)
			nodes_[i].back(*this, i);
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(std::vector<Parameter*> params, AdamConfig config) : params_(std::move(params)), cfg_(config)
{
	for (auto* p : params_) {
		m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
		v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
	}
}

void Adam::step()
{
	++t_;
	const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
	const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
	for (std::size_t i = 0; i < params_.size(); ++i) {
		auto& p = *params_[i];
		if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())
			throw std::invalid_argument("adam: gradient shape does not match its parameter");
		m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * p.grad;
		v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * p.grad.cwiseProduct(p.grad);
		p.value.array() -=
		    cfg_.lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + cfg_.eps);
	}
}

void Adam::zero_grad()
{
	for (auto* p : params_)
		p->zero_grad();
}

// ---------------------------------------------------------------------------
// Checkpoint
//
// "PLNN" | u32 version | str kind | u32 #meta, (str, str)... |
// u32 #nets, per net: str name, u32 #layers, per layer: u32 in, u32 out, u8 act |
// u32 #vectors, per vector: str name, u64 length |
// u64 #doubles, f64 blob (weights row-major then bias per layer, then vectors) |
// u64 FNV-1a of everything before it. Strings are u32 length + bytes.

namespace {

constexpr char kMagic[4] = {'P', 'L', 'N', 'N'};
constexpr std::uint32_t kVersion = 1;
static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

struct Writer
{
	std::string buf;
	template <typename T>
	void put(T v)
	{
		buf.append(reinterpret_cast<const char*>(&v), sizeof v);
	}
	void str(const std::string& s)
	{
		put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
		buf += s;
	}
};

struct Reader
{
	const std::string& buf;
	std::size_t pos = 0;
	template <typename T>
	T get()
	{
		if (pos + sizeof(T) > buf.size())
			throw std::runtime_error("checkpoint: truncated");
		T v;
		std::memcpy(&v, buf.data() + pos, sizeof v);
		pos += sizeof v;
		return v;
	}
	std::string str()
	{
		const auto n = get<std::uint32_t>();
		if (n > (1u << 20) || pos + n > buf.size())
			throw std::runtime_error("checkpoint: corrupt string");
		std::string s = buf.substr(pos, n);
		pos += n;
		return s;
	}
};

} // namespace

const Mlp& Checkpoint::net(const std::string& name) const
{
	for (const auto& [n, m] : nets)
		if (n == name)
			return m;
	throw std::runtime_error("checkpoint has no network '" + name + "'");
}

const std::vector<double>& Checkpoint::vec(const std::string& name) const
{
	for (const auto& [n, v] : vectors)
		if (n == name)
			return v;
	throw std::runtime_error("checkpoint has no vector '" + name + "'");
}

const std::string& Checkpoint::get(const std::string& key) const
{
	const auto it = meta.find(key);
	if (it == meta.end())
		throw std::runtime_error("checkpoint has no field '" + key + "'");
	return it->second;
}

std::string Checkpoint::serialize() const
{
	Writer w;
	w.buf.append(kMagic, 4);
	w.put(kVersion);
	w.str(kind);
	w.put<std::uint32_t>(static_cast<std::uint32_t>(meta.size()));
	for (const auto& [k, v] : meta) {
		w.str(k);
		w.str(v);
	}
	w.put<std::uint32_t>(static_cast<std::uint32_t>(nets.size()));
	for (const auto& [name, net] : nets) {
		w.str(name);
		w.put<std::uint32_t>(static_cast<std::uint32_t>(net.layers().size()));
		for (const auto& l : net.layers()) {
			w.put<std::uint32_t>(static_cast<std::uint32_t>(l.in_dim()));
			w.put<std::uint32_t>(static_cast<std::uint32_t>(l.out_dim()));
			w.put<std::uint8_t>(static_cast<std::uint8_t>(l.act));
		}
	}
	w.put<std::uint32_t>(static_cast<std::uint32_t>(vectors.size()));
	for (const auto& [name, v] : vectors) {
		w.str(name);
		w.put<std::uint64_t>(v.size());
	}
	std::vector<double> blob;
	for (const auto& [name, net] : nets)
		for (const auto& l : net.layers()) {
			blob.insert(blob.end(), l.w.value.data(), l.w.value.data() + l.w.value.size());
			blob.insert(blob.end(), l.b.value.data(), l.b.value.data() + l.b.value.size());
		}
	for (const auto& [name, v] : vectors)
		blob.insert(blob.end(), v.begin(), v.end());
	w.put<std::uint64_t>(blob.size());
	w.buf.append(reinterpret_cast<const char*>(blob.data()), blob.size() * sizeof(double));
	w.put<std::uint64_t>(fnv1a64(w.buf.data(), w.buf.size()));
	return w.buf;
}

Checkpoint Checkpoint::deserialize(const std::string& bytes)
{
	if (bytes.size() < 4 + 4 + 8 || std::memcmp(bytes.data(), kMagic, 4) != 0)
		throw std::runtime_error("checkpoint: bad magic");
	const std::size_t body = bytes.size() - 8;
	std::uint64_t stored;
	std::memcpy(&stored, bytes.data() + body, 8);
	if (stored != fnv1a64(bytes.data(), body))
		throw std::runtime_error("checkpoint: checksum mismatch");

	Reader r{bytes, 4};
	if (r.get<std::uint32_t>() != kVersion)
		throw std::runtime_error("checkpoint: unsupported version");
	Checkpoint c;
	c.kind = r.str();
	const auto n_meta = r.get<std::uint32_t>();
	for (std::uint32_t i = 0; i < n_meta; ++i) {
		auto k = r.str();
		c.meta[k] = r.str();
	}
	const auto n_nets = r.get<std::uint32_t>();
	if (n_nets > 64)
		throw std::runtime_error("checkpoint: corrupt header");
	std::size_t expected = 0;
	for (std::uint32_t i = 0; i < n_nets; ++i) {
		auto name = r.str();
		const auto n_layers = r.get<std::uint32_t>();
		if (n_layers == 0 || n_layers > 64)
			throw std::runtime_error("checkpoint: corrupt layer count");
		std::vector<std::size_t> dims;
		std::vector<Activation> acts;
		for (std::uint32_t l = 0; l < n_layers; ++l) {
			const auto in = r.get<std::uint32_t>();
			const auto out = r.get<std::uint32_t>();
			const auto act = r.get<std::uint8_t>();
			if (in == 0 || out == 0 || in > (1u << 16) || out > (1u << 16) || act > 3)
				throw std::runtime_error("checkpoint: corrupt layer descriptor");
			if (l == 0)
				dims.push_back(in);
			else if (dims.back() != in)
				throw std::runtime_error("checkpoint: layer dimensions do not chain");
			dims.push_back(out);
			acts.push_back(static_cast<Activation>(act));
			expected += static_cast<std::size_t>(in) * out + out;
		}
		Mlp net = Mlp::zeros(dims, Activation::identity, Activation::identity);
		for (std::size_t l = 0; l < acts.size(); ++l)
			net.layers()[l].act = acts[l];
		c.nets.emplace_back(std::move(name), std::move(net));
	}
	const auto n_vec = r.get<std::uint32_t>();
	if (n_vec > 64)
		throw std::runtime_error("checkpoint: corrupt header");
	for (std::uint32_t i = 0; i < n_vec; ++i) {
		auto name = r.str();
		const auto len = r.get<std::uint64_t>();
		if (len > (1u << 24))
			throw std::runtime_error("checkpoint: corrupt vector length");
		expected += len;
		c.vectors.emplace_back(std::move(name), std::vector<double>(len));
	}
	const auto n_blob = r.get<std::uint64_t>();
	if (n_blob != expected || r.pos + n_blob * sizeof(double) != body)
		throw std::runtime_error("checkpoint: parameter count does not match the declared architecture");
	const double* blob = reinterpret_cast<const double*>(bytes.data() + r.pos);
	std::vector<double> values(blob, blob + n_blob);
	std::size_t k = 0;
	for (auto& [name, net] : c.nets)
		for (auto& l : net.layers()) {
			std::copy_n(&values[k], l.w.value.size(), l.w.value.data());
			k += static_cast<std::size_t>(l.w.value.size());
			std::copy_n(&values[k], l.b.value.size(), l.b.value.data());
			k += static_cast<std::size_t>(l.b.value.size());
		}
	for (auto& [name, v] : c.vectors) {
		std::copy_n(&values[k], v.size(), v.data());
		k += v.size();
	}
	return c;
}

void Checkpoint::save(const std::filesystem::path& path) const
{
	std::ofstream os(path, std::ios::binary);
	if (!os)
		throw std::runtime_error("cannot write " + path.string());
	const auto bytes = serialize();
	os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
	if (!os)
		throw std::runtime_error("write failed: " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path)
{
	std::ifstream is(path, std::ios::binary);
	if (!is)
		throw std::runtime_error("cannot open " + path.string());
	std::ostringstream ss;
	ss << is.rdbuf();
	return deserialize(ss.str());
}

} // namespace polarlab::nn
