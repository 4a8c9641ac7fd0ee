#include "polarlab/util.hpp"

#include <charconv>
#include <stdexcept>
#include <system_error>

namespace polarlab {

int exact_log2(std::size_t n)
{
	if (!is_power_of_two(n))
		throw std::invalid_argument("length " + std::to_string(n) + " is not a power of two");
	int k = 0;
	while ((std::size_t{1} << k) < n)
		++k;
	return k;
}

std::string format_double(double v)
{
	char buf[64];
	const auto res = std::to_chars(buf, buf + sizeof buf, v);
	return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s)
{
	if (s.find_first_of(",\"") == std::string::npos)
		return s;
	std::string q = "\"";
	for (char c : s)
		q += c == '"' ? std::string("\"\"") : std::string(1, c);
	return q + "\"";
}

double parse_double(std::string_view s)
{
	double v = 0.0;
	const auto* first = s.data();
	const auto* last = s.data() + s.size();
	if (first != last && *first == '+')
		++first;
	const auto res = std::from_chars(first, last, v);
	if (res.ec != std::errc{} || res.ptr != last || first == last)
		throw std::invalid_argument("not a number: '" + std::string(s) + "'");
	return v;
}

std::vector<std::string_view> split(std::string_view s, char sep)
{
	std::vector<std::string_view> out;
	std::size_t start = 0;
	while (true) {
		const auto pos = s.find(sep, start);
		out.push_back(s.substr(start, pos - start));
		if (pos == std::string_view::npos)
			break;
		start = pos + 1;
	}
	return out;
}

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) noexcept
{
	const auto* p = static_cast<const unsigned char*>(data);
	std::uint64_t h = seed;
	for (std::size_t i = 0; i < size; ++i) {
		h ^= p[i];
		h *= 0x100000001b3ULL;
	}
	return h;
}

} // namespace polarlab
