#include "polarlab/dataset.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "polarlab/util.hpp"

namespace polarlab {

// ---------------------------------------------------------------------------
// Input distributions

InputDistribution InputDistribution::uniform() { return {}; }

InputDistribution InputDistribution::bernoulli(double q)
{
	if (!(q >= 0.0 && q <= 1.0))
		throw std::invalid_argument("bern: probability must lie in [0,1]");
	InputDistribution d;
	d.kind_ = Kind::bernoulli;
	d.q_ = q;
	return d;
}

InputDistribution InputDistribution::markov(double p01, double p10)
{
	if (!(p01 >= 0.0 && p01 <= 1.0 && p10 >= 0.0 && p10 <= 1.0) || p01 + p10 == 0.0)
		throw std::invalid_argument("markov: transition probabilities must lie in [0,1], not both 0");
	InputDistribution d;
	d.kind_ = Kind::markov;
	d.p01_ = p01;
	d.p10_ = p10;
	return d;
}

InputDistribution InputDistribution::parse(std::string_view descriptor)
{
	const auto colon = descriptor.find(':');
	const auto name = descriptor.substr(0, colon);
	std::vector<double> args;
	if (colon != std::string_view::npos)
		for (auto f : split(descriptor.substr(colon + 1), ','))
			args.push_back(parse_double(f));
	if (name == "uniform" && args.empty())
		return uniform();
	if (name == "bern" && args.size() == 1)
		return bernoulli(args[0]);
	if (name == "markov" && args.size() == 2)
		return markov(args[0], args[1]);
	throw std::invalid_argument("malformed input distribution '" + std::string(descriptor) + "'");
}

std::string InputDistribution::descriptor() const
{
	switch (kind_) {
	case Kind::uniform:
		return "uniform";
	case Kind::bernoulli:
		return "bern:" + format_double(q_);
	case Kind::markov:
		return "markov:" + format_double(p01_) + "," + format_double(p10_);
	}
	return {};
}

double InputDistribution::p_one() const noexcept
{
	switch (kind_) {
	case Kind::uniform:
		return 0.5;
	case Kind::bernoulli:
		return q_;
	case Kind::markov:
		return p01_ / (p01_ + p10_);
	}
	return 0.5;
}

void InputDistribution::sample(std::span<std::uint8_t> x, Rng& rng) const
{
	switch (kind_) {
	case Kind::uniform:
		for (auto& b : x)
			b = static_cast<std::uint8_t>(rng.next_u64() >> 63);
		break;
	case Kind::bernoulli:
		for (auto& b : x)
			b = rng.bernoulli(q_);
		break;
	case Kind::markov: {
		std::uint8_t prev = rng.bernoulli(p_one());
		for (auto& b : x) {
			b = prev;
			prev = prev ? !rng.bernoulli(p10_) : rng.bernoulli(p01_);
		}
		break;
	}
	}
}

// ---------------------------------------------------------------------------
// Block sources

SampledBlocks::SampledBlocks(ChannelModel model, InputDistribution input, std::size_t blocks,
                             std::size_t block_length, std::uint64_t seed)
    : model_(std::move(model)), input_(input), blocks_(blocks), length_(block_length), seed_(seed)
{
	exact_log2(block_length);
}

void SampledBlocks::block(std::size_t j, std::span<std::uint8_t> x, std::span<double> y) const
{
	if (j >= blocks_)
		throw std::out_of_range("block index out of range");
	Rng rng = Rng::stream(seed_, j);
	input_.sample(x, rng);
	ChannelState state;
	model_.sample_block(x, y, state, rng);
}

Dataset::Dataset(std::size_t blocks, std::size_t block_length)
    : blocks_(blocks), length_(block_length), x_(blocks * block_length), y_(blocks * block_length)
{
	exact_log2(block_length);
}

void Dataset::block(std::size_t j, std::span<std::uint8_t> x, std::span<double> y) const
{
	auto xr = x_row(j);
	auto yr = y_row(j);
	std::copy(xr.begin(), xr.end(), x.begin());
	std::copy(yr.begin(), yr.end(), y.begin());
}

std::span<std::uint8_t> Dataset::x_row(std::size_t j)
{
	return std::span(x_).subspan(j * length_, length_);
}
std::span<double> Dataset::y_row(std::size_t j) { return std::span(y_).subspan(j * length_, length_); }
std::span<const std::uint8_t> Dataset::x_row(std::size_t j) const
{
	return std::span(x_).subspan(j * length_, length_);
}
std::span<const double> Dataset::y_row(std::size_t j) const
{
	return std::span(y_).subspan(j * length_, length_);
}

Dataset sample_dataset(const ChannelModel& model, std::size_t blocks, std::size_t block_length,
                       const InputDistribution& input, std::uint64_t seed)
{
	SampledBlocks source(model, input, blocks, block_length, seed);
	Dataset ds(blocks, block_length);
	ds.channel = model.descriptor();
	ds.input = input.descriptor();
	ds.seed = seed;
	ds.output_kind = model.output_kind();
	for (std::size_t j = 0; j < blocks; ++j)
		source.block(j, ds.x_row(j), ds.y_row(j));
	return ds;
}

// ---------------------------------------------------------------------------
// File format (all integers little-endian):
//   "PLDS" | u32 version | u64 M | u64 N | u64 seed | u8 output kind
//   | u32 len + channel descriptor | u32 len + input descriptor
//   | ceil(M*N/8) bytes of x, LSB-first, row-major
//   | M*N outputs: u8 each for discrete channels, f64 each for real ones

namespace {

constexpr char kMagic[4] = {'P', 'L', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "dataset IO assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T v)
{
	os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is)
{
	T v{};
	if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
		throw std::runtime_error("dataset: truncated file");
	return v;
}

void put_string(std::ostream& os, const std::string& s)
{
	put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
	os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is)
{
	const auto len = get<std::uint32_t>(is);
	if (len > (1u << 16))
		throw std::runtime_error("dataset: corrupt header");
	std::string s(len, '\0');
	if (!is.read(s.data(), len))
		throw std::runtime_error("dataset: truncated file");
	return s;
}

} // namespace

void Dataset::save(const std::filesystem::path& path) const
{
	std::ofstream os(path, std::ios::binary);
	if (!os)
		throw std::runtime_error("cannot write " + path.string());
	os.write(kMagic, 4);
	put(os, kVersion);
	put<std::uint64_t>(os, blocks_);
	put<std::uint64_t>(os, length_);
	put<std::uint64_t>(os, seed);
	put<std::uint8_t>(os, static_cast<std::uint8_t>(output_kind));
	put_string(os, channel);
	put_string(os, input);

	std::vector<std::uint8_t> packed((x_.size() + 7) / 8, 0);
	for (std::size_t i = 0; i < x_.size(); ++i)
		packed[i / 8] |= static_cast<std::uint8_t>((x_[i] & 1u) << (i % 8));
	os.write(reinterpret_cast<const char*>(packed.data()), static_cast<std::streamsize>(packed.size()));

	if (output_kind == OutputKind::real) {
		os.write(reinterpret_cast<const char*>(y_.data()),
		         static_cast<std::streamsize>(y_.size() * sizeof(double)));
	} else {
		std::vector<std::uint8_t> sym(y_.size());
		for (std::size_t i = 0; i < y_.size(); ++i)
			sym[i] = static_cast<std::uint8_t>(y_[i]);
		os.write(reinterpret_cast<const char*>(sym.data()), static_cast<std::streamsize>(sym.size()));
	}
	if (!os)
		throw std::runtime_error("write failed: " + path.string());
}

Dataset Dataset::load(const std::filesystem::path& path)
{
	std::ifstream is(path, std::ios::binary);
	if (!is)
		throw std::runtime_error("cannot open " + path.string());
	char magic[4];
	if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
		throw std::runtime_error(path.string() + ": not a dataset file");
	if (get<std::uint32_t>(is) != kVersion)
		throw std::runtime_error(path.string() + ": unsupported dataset version");
	const auto blocks = get<std::uint64_t>(is);
	const auto length = get<std::uint64_t>(is);
	const auto seed = get<std::uint64_t>(is);
	const auto kind = get<std::uint8_t>(is);
	if (kind > static_cast<std::uint8_t>(OutputKind::real) || blocks > (1ull << 32) ||
	    !is_power_of_two(length) || length > (1ull << 24))
		throw std::runtime_error(path.string() + ": corrupt header");

	Dataset ds(blocks, length);
	ds.seed = seed;
	ds.output_kind = static_cast<OutputKind>(kind);
	ds.channel = get_string(is);
	ds.input = get_string(is);

	std::vector<std::uint8_t> packed((ds.x_.size() + 7) / 8);
	if (!is.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size())))
		throw std::runtime_error(path.string() + ": truncated file");
	for (std::size_t i = 0; i < ds.x_.size(); ++i)
		ds.x_[i] = (packed[i / 8] >> (i % 8)) & 1u;

	if (ds.output_kind == OutputKind::real) {
		if (!is.read(reinterpret_cast<char*>(ds.y_.data()),
		             static_cast<std::streamsize>(ds.y_.size() * sizeof(double))))
			throw std::runtime_error(path.string() + ": truncated file");
	} else {
		std::vector<std::uint8_t> sym(ds.y_.size());
		if (!is.read(reinterpret_cast<char*>(sym.data()), static_cast<std::streamsize>(sym.size())))
			throw std::runtime_error(path.string() + ": truncated file");
		for (std::size_t i = 0; i < sym.size(); ++i)
			ds.y_[i] = sym[i];
	}
	return ds;
}

} // namespace polarlab
