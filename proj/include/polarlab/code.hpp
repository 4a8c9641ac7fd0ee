// Designed polar code: block length, information set, frozen values, and
// the resolved configuration that produced it. Stored as JSON.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "polarlab/polar.hpp"

namespace polarlab {

struct CodeSpec
{
	std::size_t n_len = 0;
	std::vector<std::size_t> info_set;
	/// One bit per position; entries at information positions are 0.
	std::vector<std::uint8_t> frozen_values;
	/// "standard", or "hy" where non-information positions are shaping bits
	/// decided from the input-prior pass.
	std::string scheme = "standard";
	/// Input distribution descriptor (relevant to the hy scheme).
	std::string input = "uniform";
	std::vector<double> mi;
	std::map<std::string, std::string> config;

	/// All frozen values zero.
	static CodeSpec from_design(std::size_t n_len, const DesignResult& design);
	/// Draws the frozen values from a seeded stream. The design estimates
	/// assume uniformly random frozen bits, which all-zero values only match
	/// on channels that are symmetric under adding a codeword.
	void randomize_frozen(std::uint64_t seed);

	std::size_t k() const noexcept { return info_set.size(); }
	double rate() const noexcept { return n_len ? static_cast<double>(k()) / n_len : 0.0; }
	int n() const;
	FrozenPattern pattern() const;
	void validate() const;

	std::string to_json() const;
	static CodeSpec from_json(const std::string& text);
	void save(const std::filesystem::path& path) const;
	static CodeSpec load(const std::filesystem::path& path);
};

/// True for channels where all-zero frozen bits would not match the design
/// (memory or asymmetric channels).
bool prefers_random_frozen(const ChannelModel& model);

} // namespace polarlab
