#include "polarlab/eval.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "polarlab/kernel_source.hpp"
#include "polarlab/sct.hpp"
#include "polarlab/util.hpp"

namespace polarlab {

// ---------------------------------------------------------------------------
// Pair kernels

namespace {

// Splits interleaved [a|b] pairs into separate pair runs for each half.
void split_pairs(std::span<const double> pairs, std::size_t da, std::size_t db, std::vector<double>& pa,
                 std::vector<double>& pb)
{
	const std::size_t d = da + db;
	const std::size_t n = pairs.size() / d;
	pa.resize(n * da);
	pb.resize(n * db);
	for (std::size_t j = 0; j < n; ++j) {
		const double* src = &pairs[j * d];
		std::copy(src, src + da, &pa[j * da]);
		std::copy(src + da, src + d, &pb[j * db]);
	}
}

void join(std::span<const double> oa, std::span<const double> ob, std::size_t da, std::size_t db,
          std::span<double> out)
{
	const std::size_t d = da + db;
	const std::size_t n = out.size() / d;
	for (std::size_t j = 0; j < n; ++j) {
		std::copy(&oa[j * da], &oa[j * da] + da, &out[j * d]);
		std::copy(&ob[j * db], &ob[j * db] + db, &out[j * d + da]);
	}
}

struct PairScratch
{
	std::vector<double> pa, pb, oa, ob;
};

thread_local PairScratch pair_scratch;

} // namespace

void PairKernels::embed(std::span<const double> y, std::span<double> out) const
{
	auto& s = pair_scratch;
	s.oa.resize(y.size() * a_.dim());
	s.ob.resize(y.size() * b_.dim());
	a_.embed(y, s.oa);
	b_.embed(y, s.ob);
	join(s.oa, s.ob, a_.dim(), b_.dim(), out);
}

void PairKernels::check(std::span<const double> pairs, std::span<double> out) const
{
	auto& s = pair_scratch;
	const std::size_t n = out.size() / dim();
	split_pairs(pairs, a_.dim(), b_.dim(), s.pa, s.pb);
	s.oa.resize(n * a_.dim());
	s.ob.resize(n * b_.dim());
	a_.check(s.pa, s.oa);
	b_.check(s.pb, s.ob);
	join(s.oa, s.ob, a_.dim(), b_.dim(), out);
}

void PairKernels::bit(std::span<const double> pairs, std::span<const std::uint8_t> u,
                      std::span<double> out) const
{
	auto& s = pair_scratch;
	const std::size_t n = out.size() / dim();
	split_pairs(pairs, a_.dim(), b_.dim(), s.pa, s.pb);
	s.oa.resize(n * a_.dim());
	s.ob.resize(n * b_.dim());
	a_.bit(s.pa, u, s.oa);
	b_.bit(s.pb, u, s.ob);
	join(s.oa, s.ob, a_.dim(), b_.dim(), out);
}

double PairKernels::soft(std::span<const double> e) const { return b_.soft(e.subspan(a_.dim())); }

double PairKernels::soft_first(std::span<const double> e) const { return a_.soft(e.first(a_.dim())); }

// ---------------------------------------------------------------------------
// Encoding and decoding of messages

std::vector<std::uint8_t> encode_message(const CodeSpec& code, std::span<const std::uint8_t> message,
                                         const KernelSet* prior_kernels)
{
	if (message.size() != code.k())
		throw std::invalid_argument("message length does not match k");
	const std::size_t n_len = code.n_len;
	std::vector<std::uint8_t> u(code.frozen_values);
	if (code.scheme == "hy") {
		if (!prior_kernels)
			throw std::invalid_argument("hy code needs input-prior kernels");
		const auto f = code.pattern();
		std::vector<std::size_t> slot(n_len, 0);
		for (std::size_t j = 0; j < code.k(); ++j)
			slot[code.info_set[j]] = j;
		std::vector<double> dummy(n_len, 0.0), e0(n_len * prior_kernels->dim());
		prior_kernels->embed(dummy, e0);
		ScEngine engine(n_len, prior_kernels->dim());
		engine.run(*prior_kernels, e0, [&](std::size_t i, std::span<const double> e) -> std::uint8_t {
			u[i] = f[i] == FrozenBit::info ? message[slot[i]] : (prior_kernels->soft(e) > 0.5);
			return u[i];
		});
	} else {
		for (std::size_t j = 0; j < code.k(); ++j)
			u[code.info_set[j]] = message[j];
	}
	encode_inplace(u);
	return u;
}

std::vector<std::uint8_t> decode_message(const CodeSpec& code, const KernelSet& kernels,
                                         std::span<const double> y, const KernelSet* prior_kernels)
{
	const std::size_t n_len = code.n_len;
	if (y.size() != n_len)
		throw std::invalid_argument("output block has the wrong length");
	std::vector<std::uint8_t> u_hat;
	if (code.scheme == "hy") {
		if (!prior_kernels)
			throw std::invalid_argument("hy code needs input-prior kernels");
		const PairKernels pair(*prior_kernels, kernels);
		const auto f = code.pattern();
		std::vector<double> e0(n_len * pair.dim());
		pair.embed(y, e0);
		u_hat.resize(n_len);
		ScEngine engine(n_len, pair.dim());
		engine.run(pair, e0, [&](std::size_t i, std::span<const double> e) -> std::uint8_t {
			const double p = f[i] == FrozenBit::info ? pair.soft(e) : pair.soft_first(e);
			u_hat[i] = p > 0.5;
			return u_hat[i];
		});
	} else {
		std::vector<double> e0(n_len * kernels.dim());
		kernels.embed(y, e0);
		u_hat = sc_decode(kernels, e0, code.pattern()).u_hat;
	}
	std::vector<std::uint8_t> msg(code.k());
	for (std::size_t j = 0; j < code.k(); ++j)
		msg[j] = u_hat[code.info_set[j]];
	return msg;
}

// ---------------------------------------------------------------------------
// BER

BerResult eval_ber(const CodeSpec& code, const KernelSet& kernels, const ChannelModel& channel,
                   const StopRule& stop, std::uint64_t seed, const std::string& kernel_tag,
                   const KernelSet* prior_kernels, unsigned threads)
{
	code.validate();
	if (code.k() == 0)
		throw std::invalid_argument("code has no information bits");
	if (stop.max_blocks == 0)
		throw std::invalid_argument("max_blocks must be positive");
	const std::size_t n_len = code.n_len;
	const std::size_t k = code.k();
	const bool hy = code.scheme == "hy";
	if (hy && !prior_kernels)
		throw std::invalid_argument("hy code needs input-prior kernels");
	threads = std::max(1u, threads);

	const PairKernels pair(hy ? *prior_kernels : kernels, kernels);
	const KernelSet& dec = hy ? static_cast<const KernelSet&>(pair) : kernels;
	const auto f = code.pattern();

	// Per-thread decoder state; block j always uses stream (seed, j).
	struct Worker
	{
		ScEngine engine;
		std::vector<double> y, e0;
		std::vector<std::uint8_t> msg, u_hat;
	};
	std::vector<Worker> workers;
	for (unsigned t = 0; t < threads; ++t)
		workers.push_back({ScEngine(n_len, dec.dim()), std::vector<double>(n_len),
		                   std::vector<double>(n_len * dec.dim()), std::vector<std::uint8_t>(k),
		                   std::vector<std::uint8_t>(n_len)});
	auto block_errors = [&](std::uint64_t j, Worker& w) {
		Rng rng = Rng::stream(seed, j);
		for (auto& b : w.msg)
			b = static_cast<std::uint8_t>(rng.next_u64() >> 63);
		const auto x = encode_message(code, w.msg, prior_kernels);
		ChannelState state;
		channel.sample_block(x, w.y, state, rng);
		dec.embed(w.y, w.e0);
		w.engine.run(dec, w.e0, [&](std::size_t i, std::span<const double> e) -> std::uint8_t {
			if (f[i] != FrozenBit::info && !hy)
				return w.u_hat[i] = static_cast<std::uint8_t>(f[i]);
			const double p = (hy && f[i] != FrozenBit::info) ? pair.soft_first(e) : dec.soft(e);
			return w.u_hat[i] = p > 0.5;
		});
		std::uint64_t errors = 0;
		for (std::size_t i = 0; i < k; ++i)
			errors += w.u_hat[code.info_set[i]] != w.msg[i];
		return errors;
	};

	BerResult r;
	r.channel = channel.descriptor();
	r.kernel = kernel_tag;
	r.n = code.n();
	r.rate = code.rate();
	r.seed = seed;

	// Blocks run in chunks; counts are reduced in block order, so the stop
	// point and the totals do not depend on the thread count.
	const std::uint64_t chunk = threads == 1 ? 1 : 16 * std::uint64_t{threads};
	std::vector<std::uint64_t> errs(chunk);
	const auto t0 = std::chrono::steady_clock::now();
	bool done = false;
	for (std::uint64_t start = 0; start < stop.max_blocks && !done; start += chunk) {
		const std::uint64_t count = std::min(chunk, stop.max_blocks - start);
		if (threads == 1) {
			for (std::uint64_t i = 0; i < count; ++i)
				errs[i] = block_errors(start + i, workers[0]);
		} else {
			std::vector<std::thread> pool;
			std::exception_ptr failure;
			std::mutex failure_mutex;
			for (unsigned t = 0; t < threads; ++t) {
				pool.emplace_back([&, t] {
					try {
						for (std::uint64_t i = t; i < count; i += threads)
							errs[i] = block_errors(start + i, workers[t]);
					} catch (...) {
						const std::lock_guard<std::mutex> lock(failure_mutex);
						failure = std::current_exception();
					}
				});
			}
			for (auto& th : pool)
				th.join();
			if (failure)
				std::rethrow_exception(failure);
		}
		for (std::uint64_t i = 0; i < count; ++i) {
			r.bit_errors += errs[i];
			r.blocks = start + i + 1;
			if (!stop.fixed_blocks && r.bit_errors >= stop.min_errors) {
				done = true;
				break;
			}
		}
	}
	const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
	r.ber = static_cast<double>(r.bit_errors) / (static_cast<double>(k) * static_cast<double>(r.blocks));
	r.seconds_per_block = dt.count() / static_cast<double>(r.blocks);
	return r;
}

std::string ber_csv_header() { return "channel,kernel,n,rate,blocks,bit_errors,ber,seconds_per_block,seed"; }

std::string ber_csv_row(const BerResult& r, bool with_timing)
{
	std::ostringstream os;
	os << csv_field(r.channel) << ',' << csv_field(r.kernel) << ',' << r.n << ',' << format_double(r.rate) << ','
	   << r.blocks << ',' << r.bit_errors << ',' << format_double(r.ber) << ','
	   << (with_timing ? format_double(r.seconds_per_block) : std::string()) << ',' << r.seed;
	return os.str();
}

// ---------------------------------------------------------------------------
// Complexity

std::vector<ComplexityRow> complexity_probe(const KernelSet& kernels, const ChannelModel& channel,
                                            int n_min, int n_max, std::uint64_t blocks,
                                            std::uint64_t seed)
{
	if (n_min < 1 || n_max < n_min || n_max > 20 || blocks == 0)
		throw std::invalid_argument("complexity_probe: bad range");
	std::vector<ComplexityRow> rows;
	for (int n = n_min; n <= n_max; ++n) {
		const std::size_t n_len = std::size_t{1} << n;
		CountingKernels counted(kernels);
		const SampledBlocks data(channel, InputDistribution::uniform(), blocks, n_len, seed);
		ScEngine engine(n_len, kernels.dim());
		std::vector<std::uint8_t> x(n_len);
		std::vector<double> y(n_len), e0(n_len * kernels.dim());
		double seconds = 0.0;
		for (std::uint64_t j = 0; j < blocks; ++j) {
			data.block(j, x, y);
			const auto t0 = std::chrono::steady_clock::now();
			counted.embed(y, e0);
			engine.run(counted, e0, [&](std::size_t, std::span<const double> e) -> std::uint8_t {
				return counted.soft(e) > 0.5;
			});
			const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
			seconds += dt.count();
		}
		ComplexityRow row;
		row.n = n;
		row.f_calls = counted.f_count() / blocks;
		row.g_calls = counted.g_count() / blocks;
		row.h_calls = counted.h_count() / blocks;
		row.seconds_per_block = seconds / static_cast<double>(blocks);
		rows.push_back(row);
	}
	return rows;
}

// ---------------------------------------------------------------------------
// Plans

CodeSpec design_code(const PlanPoint& point, int n, const KernelSet& kernels, const KernelSet* prior)
{
	const auto channel = ChannelModel::parse(point.channel);
	const auto input = InputDistribution::parse(point.input);
	const std::size_t n_len = std::size_t{1} << n;
	const auto k = static_cast<std::size_t>(std::llround(point.rate * static_cast<double>(n_len)));
	if (k == 0 || k > n_len)
		throw std::invalid_argument("rate gives no information bits at n = " + std::to_string(n));
	const SampledBlocks data(channel, input, point.design_blocks, n_len, splitmix64(point.seed + static_cast<std::uint64_t>(n)));
	CodeSpec code;
	if (point.scheme == "hy") {
		if (!prior)
			throw std::invalid_argument("kernel source '" + point.kernel + "' has no input-prior pass");
		code = CodeSpec::from_design(n_len, sc_design_hy(*prior, kernels, data, k));
		code.scheme = "hy";
	} else if (point.scheme == "standard") {
		code = CodeSpec::from_design(n_len, sc_design(kernels, data, k));
		if (prefers_random_frozen(channel) || input.kind() != InputDistribution::Kind::uniform)
			code.randomize_frozen(point.seed);
	} else {
		throw std::invalid_argument("unknown scheme '" + point.scheme + "'");
	}
	code.input = input.descriptor();
	return code;
}

std::vector<PlanRow> run_plan(const ExperimentPlan& plan)
{
	std::vector<PlanRow> rows;
	for (const auto& point : plan.points) {
		for (int n = point.n_min; n <= point.n_max; ++n) {
			PlanRow row;
			row.result.channel = point.channel;
			row.result.kernel = point.kernel;
			row.result.n = n;
			row.result.rate = point.rate;
			row.result.seed = point.seed;
			try {
				if (n < 1 || n > 20)
					throw std::invalid_argument("n must lie in [1, 20]");
				const auto channel = ChannelModel::parse(point.channel);
				const auto input = InputDistribution::parse(point.input);
				const KernelBundle kb = make_kernels(point.kernel, channel, input);
				const CodeSpec code = design_code(point, n, *kb.channel, kb.prior.get());
				row.result = eval_ber(code, *kb.channel, channel, point.stop, point.seed, point.kernel,
				                      kb.prior.get(), plan.threads);
			} catch (const std::exception& e) {
				row.error = e.what();
			}
			rows.push_back(std::move(row));
		}
	}
	return rows;
}

// ---------------------------------------------------------------------------
// ISI memory sweep

std::vector<MemorySweepRow> isi_memory_sweep(const NscModel& nsc, int m_min, int m_max, int n,
                                             std::uint64_t blocks, std::uint64_t seed, double decay, double sigma2)
{
	if (m_min < 0 || m_max < m_min || m_max > 12 || n < 1 || n > 16 || blocks == 0)
		throw std::invalid_argument("isi_memory_sweep: bad range");
	const std::size_t n_len = std::size_t{1} << n;
	std::vector<MemorySweepRow> rows;
	for (int m = m_min; m <= m_max; ++m) {
		const auto channel = ChannelModel::isi_geometric(m, decay, sigma2);
		auto fsc = FscSpec::from_channel(channel);
		fsc.use_reset_state();
		const TrellisKernels sct(fsc);
		const NeuralKernels neural(nsc);
		const SampledBlocks data(channel, InputDistribution::uniform(), blocks, n_len, seed);
		MemorySweepRow row;
		row.m = m;
		std::vector<std::uint8_t> x(n_len);
		std::vector<double> y(n_len);
		auto decode_all = [&](const KernelSet& k) {
			ScEngine engine(n_len, k.dim());
			std::vector<double> e0(n_len * k.dim());
			const auto t0 = std::chrono::steady_clock::now();
			for (std::uint64_t j = 0; j < blocks; ++j) {
				data.block(j, x, y);
				k.embed(y, e0);
				engine.run(k, e0, [&](std::size_t, std::span<const double> e) -> std::uint8_t {
					return k.soft(e) > 0.5;
				});
			}
			const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
			return dt.count() / static_cast<double>(blocks);
		};
		row.sct_seconds_per_block = decode_all(sct);
		row.nsc_seconds_per_block = decode_all(neural);
		row.sct_check_mults = static_cast<double>(sct.check_multiplies()) / static_cast<double>(blocks);
		row.nsc_macs = static_cast<double>(neural.macs()) / static_cast<double>(blocks);
		rows.push_back(row);
	}
	return rows;
}

} // namespace polarlab
