// Monte-Carlo BER evaluation, experiment plans and complexity probes.

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "polarlab/channels.hpp"
#include "polarlab/code.hpp"
#include "polarlab/dataset.hpp"
#include "polarlab/nsc.hpp"
#include "polarlab/polar.hpp"

namespace polarlab {

struct StopRule
{
	std::uint64_t min_errors = 100;
	std::uint64_t max_blocks = 10'000'000;
	/// Ignore min_errors and simulate exactly max_blocks (unbiased comparisons).
	bool fixed_blocks = false;
};

struct BerResult
{
	std::string channel;
	std::string kernel;
	int n = 0;
	double rate = 0.0;
	std::uint64_t blocks = 0;
	std::uint64_t bit_errors = 0;
	double ber = 0.0;
	double seconds_per_block = 0.0;
	std::uint64_t seed = 0;
};

/// Concatenates two kernel sets: embeddings are [e_x | e_y] and every
/// operation acts on each half independently. soft() reports the second
/// (channel) half; soft_first() the first (input-prior) half.
class PairKernels final : public KernelSet
{
public:
	PairKernels(const KernelSet& first, const KernelSet& second) : a_(first), b_(second) {}

	std::size_t dim() const override { return a_.dim() + b_.dim(); }
	void embed(std::span<const double> y, std::span<double> out) const override;
	void check(std::span<const double> pairs, std::span<double> out) const override;
	void bit(std::span<const double> pairs, std::span<const std::uint8_t> u,
	         std::span<double> out) const override;
	double soft(std::span<const double> e) const override;
	double soft_first(std::span<const double> e) const;

private:
	const KernelSet& a_;
	const KernelSet& b_;
};

/// Encodes one message under `code`. For the hy scheme the non-information
/// bits are the argmax of the input-prior posterior given earlier bits
/// (ties to 0), computed by an SC pass on the prior kernels.
std::vector<std::uint8_t> encode_message(const CodeSpec& code, std::span<const std::uint8_t> message,
                                         const KernelSet* prior_kernels);

/// Decodes one block and returns the estimated information bits.
std::vector<std::uint8_t> decode_message(const CodeSpec& code, const KernelSet& kernels,
                                         std::span<const double> y, const KernelSet* prior_kernels);

/// Block j draws its message and channel noise from Rng::stream(seed, j), so
/// different kernel sets evaluated with one seed see the same realizations.
/// Results other than the timing do not depend on `threads`.
BerResult eval_ber(const CodeSpec& code, const KernelSet& kernels, const ChannelModel& channel,
                   const StopRule& stop, std::uint64_t seed, const std::string& kernel_tag = "",
                   const KernelSet* prior_kernels = nullptr, unsigned threads = 1);

std::string ber_csv_header();
/// One CSV row; seconds_per_block is left empty unless with_timing.
std::string ber_csv_row(const BerResult& r, bool with_timing);

struct ComplexityRow
{
	int n = 0;
	std::uint64_t f_calls = 0;
	std::uint64_t g_calls = 0;
	std::uint64_t h_calls = 0;
	double seconds_per_block = 0.0;
};

/// Decodes `blocks` blocks per n on `channel` with instrumented kernels.
std::vector<ComplexityRow> complexity_probe(const KernelSet& kernels, const ChannelModel& channel,
                                            int n_min, int n_max, std::uint64_t blocks,
                                            std::uint64_t seed);

/// One figure curve: design at every n with `design_blocks` sampled blocks,
/// then evaluate. The kernel field takes the kernel-source descriptors.
struct PlanPoint
{
	std::string channel;
	std::string kernel = "classic";
	std::string input = "uniform";
	/// "standard" or "hy".
	std::string scheme = "standard";
	int n_min = 3;
	int n_max = 10;
	double rate = 0.25;
	StopRule stop;
	std::size_t design_blocks = 10000;
	std::uint64_t seed = 0;
};

struct ExperimentPlan
{
	std::vector<PlanPoint> points;
	unsigned threads = 1;
};

struct PlanRow
{
	BerResult result;
	/// Non-empty if this point failed; the rest of the plan still runs.
	std::string error;
};

/// Designs the code for one (point, n) the same way run_plan does.
CodeSpec design_code(const PlanPoint& point, int n, const KernelSet& kernels, const KernelSet* prior);

std::vector<PlanRow> run_plan(const ExperimentPlan& plan);

struct MemorySweepRow
{
	int m = 0;
	/// Trellis check-node multiplies per block.
	double sct_check_mults = 0.0;
	/// Multiply-accumulates of the neural kernels per block.
	double nsc_macs = 0.0;
	double sct_seconds_per_block = 0.0;
	double nsc_seconds_per_block = 0.0;
};

/// Decodes the same ISI blocks (taps decay^i, i = 0..m) with trellis and
/// neural kernels for each memory m and reports the per-block cost of each.
std::vector<MemorySweepRow> isi_memory_sweep(const NscModel& nsc, int m_min, int m_max, int n,
                                             std::uint64_t blocks, std::uint64_t seed, double decay = 0.9,
                                             double sigma2 = 0.5);

} // namespace polarlab
