// Input distributions, block sources and the on-disk dataset format.
//
// A dataset is M independent blocks of N (input bit, channel output) pairs.
// Channel state is reset at every block boundary and block j is drawn from
// its own random stream, so a lazily sampled source and a materialized
// Dataset with the same seed hold identical blocks.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "polarlab/channels.hpp"
#include "polarlab/rng.hpp"

namespace polarlab {

class InputDistribution
{
public:
	enum class Kind { uniform, bernoulli, markov };

	static InputDistribution uniform();
	/// i.i.d. with P(X = 1) = q.
	static InputDistribution bernoulli(double q);
	/// Stationary first-order Markov chain with P(1|0) = p01 and P(0|1) = p10.
	static InputDistribution markov(double p01, double p10);

	/// `uniform`, `bern:q`, `markov:p01,p10`.
	static InputDistribution parse(std::string_view descriptor);
	std::string descriptor() const;

	Kind kind() const noexcept { return kind_; }
	/// Stationary P(X = 1).
	double p_one() const noexcept;
	double p01() const noexcept { return p01_; }
	double p10() const noexcept { return p10_; }

	void sample(std::span<std::uint8_t> x, Rng& rng) const;

private:
	Kind kind_ = Kind::uniform;
	double q_ = 0.5;
	double p01_ = 0.5;
	double p10_ = 0.5;
};

/// Read access to a collection of equal-length blocks.
class BlockSource
{
public:
	virtual ~BlockSource() = default;
	virtual std::size_t blocks() const = 0;
	virtual std::size_t block_length() const = 0;
	/// Fills x and y (both of block_length()) with block j.
	virtual void block(std::size_t j, std::span<std::uint8_t> x, std::span<double> y) const = 0;
};

/// Generates blocks on demand from (channel, input distribution, seed).
class SampledBlocks final : public BlockSource
{
public:
	SampledBlocks(ChannelModel model, InputDistribution input, std::size_t blocks,
	              std::size_t block_length, std::uint64_t seed);

	std::size_t blocks() const override { return blocks_; }
	std::size_t block_length() const override { return length_; }
	void block(std::size_t j, std::span<std::uint8_t> x, std::span<double> y) const override;

	const ChannelModel& model() const noexcept { return model_; }
	const InputDistribution& input() const noexcept { return input_; }
	std::uint64_t seed() const noexcept { return seed_; }

private:
	ChannelModel model_;
	InputDistribution input_;
	std::size_t blocks_;
	std::size_t length_;
	std::uint64_t seed_;
};

class Dataset final : public BlockSource
{
public:
	Dataset(std::size_t blocks, std::size_t block_length);

	std::size_t blocks() const override { return blocks_; }
	std::size_t block_length() const override { return length_; }
	void block(std::size_t j, std::span<std::uint8_t> x, std::span<double> y) const override;

	std::span<std::uint8_t> x_row(std::size_t j);
	std::span<double> y_row(std::size_t j);
	std::span<const std::uint8_t> x_row(std::size_t j) const;
	std::span<const double> y_row(std::size_t j) const;

	std::string channel;
	std::string input = "uniform";
	std::uint64_t seed = 0;
	OutputKind output_kind = OutputKind::binary;

	void save(const std::filesystem::path& path) const;
	static Dataset load(const std::filesystem::path& path);

private:
	std::size_t blocks_;
	std::size_t length_;
	std::vector<std::uint8_t> x_;
	std::vector<double> y_;
};

/// Materializes `blocks` blocks; N must be a power of two.
Dataset sample_dataset(const ChannelModel& model, std::size_t blocks, std::size_t block_length,
                       const InputDistribution& input, std::uint64_t seed);

} // namespace polarlab
