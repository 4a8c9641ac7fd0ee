#include "polarlab/code.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "polarlab/util.hpp"

namespace polarlab {

CodeSpec CodeSpec::from_design(std::size_t n_len, const DesignResult& design)
{
	CodeSpec c;
	c.n_len = n_len;
	c.info_set = design.info_set;
	c.frozen_values.assign(n_len, 0);
	c.mi = design.mi;
	c.validate();
	return c;
}

void CodeSpec::randomize_frozen(std::uint64_t seed)
{
	Rng rng = Rng::stream(seed, 0xf207e2);
	for (auto& v : frozen_values)
		v = static_cast<std::uint8_t>(rng.next_u64() >> 63);
	for (auto i : info_set)
		frozen_values[i] = 0;
}

bool prefers_random_frozen(const ChannelModel& model)
{
	return model.kind() != ChannelKind::bsc && model.kind() != ChannelKind::awgn;
}

int CodeSpec::n() const { return exact_log2(n_len); }

FrozenPattern CodeSpec::pattern() const
{
	FrozenPattern f(n_len);
	for (std::size_t i = 0; i < n_len; ++i)
		f[i] = frozen_values[i] ? FrozenBit::one : FrozenBit::zero;
	for (auto i : info_set)
		f[i] = FrozenBit::info;
	return f;
}

void CodeSpec::validate() const
{
	exact_log2(n_len);
	if (frozen_values.size() != n_len)
		throw std::invalid_argument("code: frozen values must cover every position");
	for (std::size_t j = 0; j < info_set.size(); ++j) {
		if (info_set[j] >= n_len)
			throw std::invalid_argument("code: information index out of range");
		if (j > 0 && info_set[j] <= info_set[j - 1])
			throw std::invalid_argument("code: information set must be strictly increasing");
	}
	for (auto v : frozen_values)
		if (v > 1)
			throw std::invalid_argument("code: frozen values must be bits");
	if (scheme != "standard" && scheme != "hy")
		throw std::invalid_argument("code: unknown scheme '" + scheme + "'");
	if (!mi.empty() && mi.size() != n_len)
		throw std::invalid_argument("code: estimate vector has the wrong length");
}

std::string CodeSpec::to_json() const
{
	nlohmann::ordered_json j;
	j["N"] = n_len;
	j["n"] = n();
	j["k"] = k();
	j["rate"] = rate();
	j["scheme"] = scheme;
	j["input"] = input;
	j["info_set"] = info_set;
	j["frozen_values"] = frozen_values;
	j["mi_estimates"] = mi;
	j["config"] = config;
	return j.dump(2) + "\n";
}

CodeSpec CodeSpec::from_json(const std::string& text)
{
	CodeSpec c;
	try {
		const auto j = nlohmann::json::parse(text);
		c.n_len = j.at("N").get<std::size_t>();
		c.info_set = j.at("info_set").get<std::vector<std::size_t>>();
		c.frozen_values = j.at("frozen_values").get<std::vector<std::uint8_t>>();
		c.scheme = j.value("scheme", std::string("standard"));
		c.input = j.value("input", std::string("uniform"));
		if (j.contains("mi_estimates"))
			c.mi = j.at("mi_estimates").get<std::vector<double>>();
		if (j.contains("config"))
			c.config = j.at("config").get<std::map<std::string, std::string>>();
		if (j.contains("k") && j.at("k").get<std::size_t>() != c.info_set.size())
			throw std::invalid_argument("code: k does not match the information set");
	} catch (const nlohmann::json::exception& e) {
		throw std::invalid_argument(std::string("code: malformed JSON: ") + e.what());
	}
	c.validate();
	return c;
}

void CodeSpec::save(const std::filesystem::path& path) const
{
	std::ofstream os(path, std::ios::binary);
	if (!os)
		throw std::runtime_error("cannot write " + path.string());
	os << to_json();
	if (!os)
		throw std::runtime_error("write failed: " + path.string());
}

CodeSpec CodeSpec::load(const std::filesystem::path& path)
{
	std::ifstream is(path, std::ios::binary);
	if (!is)
		throw std::runtime_error("cannot open " + path.string());
	std::ostringstream ss;
	ss << is.rdbuf();
	return from_json(ss.str());
}

} // namespace polarlab
