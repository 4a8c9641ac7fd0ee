// Acceptance suite. Prints one PASS/FAIL line per criterion; arguments pick
// criteria by number (default: all). Exit status is nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <unistd.h>

#include "oracles.hpp"
#include "polarlab/cli.hpp"
#include "polarlab/code.hpp"
#include "polarlab/eval.hpp"
#include "polarlab/mine.hpp"
#include "polarlab/nsc.hpp"
#include "polarlab/oracle.hpp"
#include "polarlab/sct.hpp"
#include "polarlab/util.hpp"

using namespace polarlab;
namespace fs = std::filesystem;

namespace {

struct Outcome
{
	bool pass = true;
	std::ostringstream detail;

	void require(bool ok, const std::string& what)
	{
		if (!ok) {
			pass = false;
			detail << " [failed: " << what << "]";
		}
	}
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
	return std::chrono::duration<double>(Clock::now() - t0).count();
}

double h2(double p)
{
	return -p * std::log2(p) - (1 - p) * std::log2(1 - p);
}

bool within_factor(double a, double b, double factor)
{
	return a > 0 && b > 0 && a <= factor * b && b <= factor * a;
}

// 1: analytic SC posteriors equal brute force on memoryless channels.
void oracle_memoryless(Outcome& o)
{
	double worst = 0.0;
	for (const char* d : {"bsc:0.1", "awgn:0.5", "asymbec:0.4,0.8159"})
		for (int n = 1; n <= 3; ++n)
			worst = std::max(worst, oracle_check(ChannelModel::parse(d), n, 200, 11 + n).max_abs_diff);
	o.detail << "max |diff| " << worst;
	o.require(worst < 1e-9, "tolerance 1e-9");
}

// 2: trellis posteriors equal brute force; one-state trellis equals classic SC.
void oracle_memory(Outcome& o)
{
	double worst = 0.0;
	for (const char* d : {"ising", "isi:1,0.9,0.5"})
		for (int n = 1; n <= 3; ++n)
			worst = std::max(worst, oracle_check(ChannelModel::parse(d), n, 200, 21 + n).max_abs_diff);
	o.detail << "max |diff| vs enumeration " << worst;
	o.require(worst < 1e-8, "tolerance 1e-8");

	double single = 0.0;
	for (const char* d : {"bsc:0.1", "awgn:0.5", "asymbec:0.4,0.8159"}) {
		const auto ch = ChannelModel::parse(d);
		const TrellisKernels sct(FscSpec::from_channel(ch));
		const ClassicKernels classic(ch);
		for (std::size_t n_len : {2u, 4u, 8u}) {
			const SampledBlocks data(ch, InputDistribution::uniform(), 100, n_len, 31);
			std::vector<std::uint8_t> x(n_len);
			std::vector<double> y(n_len), e_sct(n_len * sct.dim()), e_cls(n_len);
			for (std::size_t j = 0; j < data.blocks(); ++j) {
				data.block(j, x, y);
				const auto u = encode(x);
				sct.embed(y, e_sct);
				classic.embed(y, e_cls);
				const auto a = sc_posteriors(sct, e_sct, u);
				const auto b = sc_posteriors(classic, e_cls, u);
				for (std::size_t i = 0; i < n_len; ++i)
					single = std::max(single, std::abs(a[i] - b[i]));
			}
		}
	}
	o.detail << ", single-state vs classic " << single;
	o.require(single < 1e-9, "single-state tolerance 1e-9");
}

// 3: BER at n = 10, rate 1/4, design over 1e5 blocks.
void figure_points(Outcome& o)
{
	struct Point
	{
		const char* channel;
		const char* kernel;
		double reference;
	};
	for (const Point& p : {Point{"bsc:0.1", "classic", 1.1e-5}, Point{"awgn:0.5", "classic", 4.0e-5},
	                       Point{"ising", "sct", 3.0e-5}}) {
		const auto t0 = Clock::now();
		ExperimentPlan plan;
		PlanPoint pt;
		pt.channel = p.channel;
		pt.kernel = p.kernel;
		pt.n_min = pt.n_max = 10;
		pt.design_blocks = 100000;
		// Decoding errors come in bursts of ~25 bits, so 1000 bit errors is
		// about 40 failed blocks.
		pt.stop.min_errors = 1000;
		pt.seed = 1;
		plan.points.push_back(pt);
		const auto row = run_plan(plan).at(0);
		const double dt = seconds_since(t0);
		o.detail << p.channel << " ber " << row.result.ber << " (ref " << p.reference << ", " << row.result.blocks
		         << " blocks, " << std::lround(dt) << " s); ";
		o.require(row.error.empty(), row.error);
		o.require(within_factor(row.result.ber, p.reference, 3.0), std::string(p.channel) + " within x3");
		o.require(dt <= 1800, std::string(p.channel) + " under 30 minutes");
	}
}

// 4: MINE estimate, embedding proxy and proxy-designed BER.
void mine_pipeline(Outcome& o)
{
	const auto ch = ChannelModel::bsc(0.1);
	const SampledBlocks data(ch, InputDistribution::uniform(), 100000 / 16, 16, 5);
	MineConfig cfg;
	cfg.seed = 1;
	const MineModel m = train_mine(data, ch.output_kind(), cfg);
	const double target = 1 - h2(0.1);
	o.detail << "mi " << m.mi_bits << " bits (1-h2(0.1) = " << target << ")";
	o.require(std::abs(m.mi_bits - target) <= 0.02, "mi within 0.02");

	const ClassicKernels proxy = extract_embedding(m);
	const double ys[2] = {0.0, 1.0};
	double e[2];
	proxy.embed(ys, e);
	const double llr = std::log(9.0);
	o.detail << ", E(0) " << e[0] << ", E(1) " << e[1];
	o.require(std::abs(e[0] + llr) <= 0.3 && std::abs(e[1] - llr) <= 0.3, "embedding within 0.3 of -+log 9");

	const ClassicKernels exact(ch);
	PlanPoint pt;
	pt.channel = "bsc:0.1";
	pt.design_blocks = 10000;
	pt.seed = 2;
	pt.stop.min_errors = 200;
	o.detail << ", ber ratio proxy/analytic:";
	for (int n = 3; n <= 8; ++n) {
		const auto code_exact = design_code(pt, n, exact, nullptr);
		const auto code_proxy = design_code(pt, n, proxy, nullptr);
		const auto a = eval_ber(code_exact, exact, ch, pt.stop, pt.seed + n);
		const auto b = eval_ber(code_proxy, proxy, ch, pt.stop, pt.seed + n);
		o.detail << " n" << n << "=" << std::setprecision(3) << b.ber / a.ber;
		o.require(within_factor(a.ber, b.ber, 3.0), "n=" + std::to_string(n) + " within x3");
	}
}

// 5: neural SC loss structure, gradients, Ising training and BER.
void nsc_training(Outcome& o)
{
	// (a) term count.
	{
		Rng rng(1);
		NscModel m({8, 50}, rng);
		bool ok = true;
		for (std::size_t n_len : {1u, 2u, 4u, 8u, 32u}) {
			const SampledBlocks data(ChannelModel::bsc(0.1), InputDistribution::uniform(), 1, n_len, 3);
			std::vector<std::uint8_t> x(n_len);
			std::vector<double> y(n_len);
			data.block(0, x, y);
			nn::Tape t;
			const auto l = nsc_loss(t, m, nsc_embed(t, m, y), encode(x), 1);
			ok = ok && l.terms == n_len * (static_cast<std::size_t>(exact_log2(n_len)) + 1);
		}
		o.detail << "(a) terms " << (ok ? "ok" : "wrong");
		o.require(ok, "term count");
	}
	// (b) finite differences over every parameter at N = 4.
	{
		Rng rng(5);
		NscModel m({8, 50}, rng);
		for (auto* p : m.parameters())
			if (p->value.rows() == 1)
				for (Eigen::Index i = 0; i < p->value.size(); ++i)
					p->value.data()[i] = 0.2 * (rng.uniform() - 0.5);
		const SampledBlocks data(ChannelModel::awgn(0.5), InputDistribution::uniform(), 1, 4, 9);
		std::vector<std::uint8_t> x(4);
		std::vector<double> y(4);
		data.block(0, x, y);
		const auto u = encode(x);
		auto loss = [&] {
			nn::Tape t;
			return t.value(nsc_loss(t, m, nsc_embed(t, m, y), u, 1).loss)(0, 0);
		};
		for (auto* p : m.parameters())
			p->zero_grad();
		{
			nn::Tape t;
			t.backward(nsc_loss(t, m, nsc_embed(t, m, y), u, 1).loss);
		}
		double worst = 0.0;
		const double h = 1e-6;
		for (auto* p : m.parameters())
			for (Eigen::Index i = 0; i < p->value.size(); ++i) {
				const double orig = p->value.data()[i];
				p->value.data()[i] = orig + h;
				const double up = loss();
				p->value.data()[i] = orig - h;
				const double down = loss();
				p->value.data()[i] = orig;
				const double fd = (up - down) / (2 * h);
				const double an = p->grad.data()[i];
				const double scale = std::max(std::abs(fd), std::abs(an));
				if (scale > 1e-6)
					worst = std::max(worst, std::abs(fd - an) / scale);
			}
		o.detail << ", (b) worst rel err " << worst;
		o.require(worst < 1e-4, "gradient rel err < 1e-4");
	}
	// (c) Ising, n_t = 5: per-position estimates against the trellis decoder.
	const auto ising = ChannelModel::ising();
	auto fsc = FscSpec::from_channel(ising);
	fsc.use_reset_state();
	const TrellisKernels sct(fsc);
	const SampledBlocks train(ising, InputDistribution::uniform(), 1000000, 32, 1);
	const SampledBlocks test(ising, InputDistribution::uniform(), 20000, 32, 2);
	NscTrainConfig cfg;
	cfg.n_t = 5;
	cfg.iterations = 100000;
	cfg.batch = 16;
	cfg.seed = 3;
	const auto t0 = Clock::now();
	const auto trained = train_nsc(train, OutputKind::binary, cfg);
	const double train_s = seconds_since(t0);
	const NeuralKernels nk(trained.model);
	const auto ref = sc_design(sct, test, 8);
	const auto est = sc_design(nk, test, 8);
	double worst = 0.0;
	for (std::size_t i = 0; i < 32; ++i)
		worst = std::max(worst, std::abs(est.mi[i] - ref.mi[i]));
	std::size_t overlap = 0;
	for (auto a : est.info_set)
		overlap += std::count(ref.info_set.begin(), ref.info_set.end(), a);
	o.detail << ", (c) " << cfg.iterations << " iterations in " << std::lround(train_s) << " s, worst |dI| " << worst
	         << ", top-8 overlap " << overlap;
	o.require(worst <= 0.1, "estimates within 0.1 bit");
	o.require(overlap >= 7, "top-8 overlap >= 7");

	// (d) BER at n = 8, rate 1/4, neural vs trellis kernels.
	PlanPoint pt;
	pt.channel = "ising";
	pt.design_blocks = 10000;
	pt.seed = 4;
	pt.stop.min_errors = 200;
	const auto code_sct = design_code(pt, 8, sct, nullptr);
	const auto code_nsc = design_code(pt, 8, nk, nullptr);
	const auto a = eval_ber(code_sct, sct, ising, pt.stop, 5);
	const auto b = eval_ber(code_nsc, nk, ising, pt.stop, 5);
	o.detail << ", (d) ber sct " << a.ber << " nsc " << b.ber;
	o.require(within_factor(a.ber, b.ber, 5.0), "nsc ber within x5 of sct");
	o.require(seconds_since(t0) <= 7200, "under 2 hours");
}

// 6: kernel call counts and the memory sweep.
void complexity(Outcome& o)
{
	const auto ch = ChannelModel::bsc(0.1);
	bool counts = true;
	Rng rng(1);
	const NscModel untrained({8, 50}, rng);
	const ClassicKernels classic(ch);
	const NeuralKernels neural(untrained);
	for (const KernelSet* k : {static_cast<const KernelSet*>(&classic), static_cast<const KernelSet*>(&neural)})
		for (const auto& r : complexity_probe(*k, ch, 1, 10, 3, 1)) {
			const std::uint64_t n_len = std::uint64_t{1} << r.n;
			const std::uint64_t expect = n_len / 2 * static_cast<std::uint64_t>(r.n);
			counts = counts && r.f_calls == expect && r.g_calls == expect && r.h_calls == n_len;
		}
	o.detail << "F/G calls " << (counts ? "= (N/2)log2 N" : "wrong");
	o.require(counts, "F/G call counts");

	const auto rows = isi_memory_sweep(untrained, 1, 4, 8, 4, 1);
	o.detail << "; trellis check mults ratio per m step:";
	double lo_macs = rows[0].nsc_macs, hi_macs = rows[0].nsc_macs;
	for (std::size_t i = 1; i < rows.size(); ++i) {
		const double ratio = rows[i].sct_check_mults / rows[i - 1].sct_check_mults;
		o.detail << ' ' << ratio;
		o.require(std::abs(ratio - 8.0) <= 0.8, "trellis growth ~ |S|^3");
		lo_macs = std::min(lo_macs, rows[i].nsc_macs);
		hi_macs = std::max(hi_macs, rows[i].nsc_macs);
	}
	const double spread = (hi_macs - lo_macs) / lo_macs;
	o.detail << "; nsc MACs/block spread " << spread;
	o.require(spread < 0.1, "nsc cost varies < 10%");
}

// 7: two-pass design against enumeration; uniform-input sanity for the prior pass.
void hy_scheme(Outcome& o)
{
	const auto m = ChannelModel::asym_bec(0.4, 0.8159);
	const double q = 9.0 / 16.0;
	const std::size_t n_len = 8;
	auto px = [&](std::span<const std::uint8_t> x) { return oracle::iid_prob(x, q); };
	const auto h_given_y = oracle::exact_conditional_entropies(
	    n_len, 3,
	    [&](std::span<const std::uint8_t> x, std::span<const double> y) {
		    double p = 1.0;
		    for (std::size_t t = 0; t < x.size(); ++t)
			    p *= m.transition(y[t], x[t], {});
		    return p;
	    },
	    px);
	const auto hx = oracle::exact_source_entropies(n_len, px);
	const SampledBlocks data(m, InputDistribution::bernoulli(q), 10000, n_len, 77);
	const auto r = sc_design_hy(prior_kernels(q), ClassicKernels(m, std::log(q / (1 - q))), data, 3);
	double worst = 0.0;
	for (std::size_t i = 0; i < n_len; ++i)
		worst = std::max(worst, std::abs(r.mi[i] - (hx[i] - h_given_y[i])));
	o.detail << "hy design vs enumeration " << worst << " bit";
	o.require(worst <= 0.02, "within 0.02 bit");

	const auto bsc = ChannelModel::bsc(0.1);
	const SampledBlocks uni(bsc, InputDistribution::uniform(), 100000, 16, 6);
	NscTrainConfig cfg;
	cfg.n_t = 4;
	cfg.iterations = 30000;
	cfg.seed = 7;
	const auto trained = train_nsc_hy(uni, OutputKind::binary, cfg);
	const NeuralKernels prior(trained.model, NeuralKernels::Pass::prior);
	const SampledBlocks test(bsc, InputDistribution::uniform(), 500, 16, 8);
	std::vector<std::uint8_t> x(16);
	std::vector<double> y(16), e(16 * prior.dim());
	double dev = 0.0;
	for (std::size_t j = 0; j < test.blocks(); ++j) {
		test.block(j, x, y);
		prior.embed(y, e);
		for (double p : sc_posteriors(prior, e, encode(x)))
			dev = std::max(dev, std::abs(p - 0.5));
	}
	o.detail << ", uniform-input prior pass max |P - 0.5| " << dev;
	o.require(dev <= 0.05, "prior pass within 0.5 +- 0.05");
}

// 8: each CLI pipeline twice with one seed gives identical bytes.
void determinism(Outcome& o)
{
	const fs::path root = fs::temp_directory_path() / ("polarlab_accept_" + std::to_string(::getpid()));
	const std::vector<std::vector<std::string>> pipeline = {
	    {"sample", "--channel", "bsc:0.1", "--n", "6", "--blocks", "3000", "--seed", "3", "--out", "bsc.bin"},
	    {"design", "--kernels", "classic", "--data", "bsc.bin", "--rate", "0.25", "--seed", "3", "--out", "c.json",
	     "--mi-csv", "mi.csv"},
	    {"eval-ber", "--code", "c.json", "--kernels", "classic", "--channel", "bsc:0.1", "--min-errors", "100",
	     "--seed", "3", "--threads", "2", "--out", "ber.csv"},
	    {"eval-ber", "--kernels", "sct", "--channel", "ising", "--n-range", "3:6", "--design-blocks", "2000",
	     "--min-errors", "50", "--max-blocks", "20000", "--seed", "3", "--out", "plan.csv"},
	    {"train-mine", "--data", "bsc.bin", "--iters", "300", "--seed", "3", "--out", "m.ckpt", "--trace",
	     "mine_trace.csv"},
	    {"design", "--kernels", "mine:m.ckpt", "--data", "bsc.bin", "--k", "16", "--out", "cm.json"},
	    {"eval-ber", "--code", "cm.json", "--kernels", "mine:m.ckpt", "--channel", "bsc:0.1", "--fixed-blocks",
	     "--max-blocks", "500", "--seed", "3", "--out", "ber_mine.csv"},
	    {"sample", "--channel", "ising", "--n", "4", "--blocks", "2000", "--seed", "3", "--out", "ising.bin"},
	    {"train-nsc", "--data", "ising.bin", "--nt", "4", "--iters", "300", "--seed", "3", "--out", "n.ckpt",
	     "--trace", "nsc_trace.csv"},
	    {"design", "--kernels", "nsc:n.ckpt", "--channel", "ising", "--n", "6", "--blocks", "500", "--rate", "0.25",
	     "--seed", "3", "--out", "cn.json"},
	    {"eval-ber", "--code", "cn.json", "--kernels", "nsc:n.ckpt", "--channel", "ising", "--fixed-blocks",
	     "--max-blocks", "300", "--seed", "3", "--out", "ber_nsc.csv"},
	    {"sample", "--channel", "asymbec:0.4,0.8159", "--input", "bern:0.5625", "--n", "4", "--blocks", "2000",
	     "--seed", "3", "--out", "asym.bin"},
	    {"train-nsc-hy", "--data", "asym.bin", "--nt", "4", "--iters", "200", "--seed", "3", "--out", "hy.ckpt"},
	    {"eval-ber", "--kernels", "classic", "--channel", "asymbec:0.4,0.8159", "--input", "bern:0.5625", "--scheme",
	     "hy", "--n-range", "4:5", "--design-blocks", "1000", "--min-errors", "50", "--seed", "3", "--out",
	     "hy.csv"},
	    {"probe-complexity", "--channel", "bsc:0.1", "--n-min", "3", "--n-max", "8", "--out", "probe.csv"},
	    {"probe-complexity", "--isi-sweep", "1:3", "--nsc", "n.ckpt", "--n", "5", "--blocks", "2", "--out",
	     "sweep.csv"},
	};
	std::map<std::string, std::string> first;
	bool identical = true, ran = true;
	std::size_t files = 0;
	const auto cwd = fs::current_path();
	for (int round = 0; round < 2; ++round) {
		const fs::path dir = root / std::to_string(round);
		fs::create_directories(dir);
		fs::current_path(dir);
		for (const auto& cmd : pipeline) {
			std::vector<const char*> argv{"polarlab"};
			for (const auto& a : cmd)
				argv.push_back(a.c_str());
			std::ostringstream out, err;
			if (parse_and_dispatch(static_cast<int>(argv.size()), argv.data(), out, err) != 0) {
				ran = false;
				o.detail << "[" << cmd[0] << ": " << err.str() << "] ";
			}
		}
		fs::current_path(cwd);
		for (const auto& entry : fs::directory_iterator(dir)) {
			std::ifstream f(entry.path(), std::ios::binary);
			const std::string bytes{std::istreambuf_iterator<char>(f), {}};
			const auto name = entry.path().filename().string();
			if (round == 0)
				first[name] = bytes;
			else if (first.count(name) == 0 || first[name] != bytes) {
				identical = false;
				o.detail << "differs: " << name << "; ";
			}
			files += round;
		}
	}
	fs::remove_all(root);
	o.detail << pipeline.size() << " commands, " << files << " output files compared byte for byte";
	o.require(ran, "every command succeeds");
	o.require(identical && files == first.size(), "identical outputs");
}

} // namespace

int main(int argc, char** argv)
{
	const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria = {
	    {"oracle equivalence, memoryless", oracle_memoryless},
	    {"oracle equivalence, memory", oracle_memory},
	    {"BER at n=10 against published points", figure_points},
	    {"MINE pipeline", mine_pipeline},
	    {"NSC training", nsc_training},
	    {"complexity", complexity},
	    {"HY scheme", hy_scheme},
	    {"determinism", determinism},
	};
	std::set<int> pick;
	for (int i = 1; i < argc; ++i)
		pick.insert(std::atoi(argv[i]));
	// Runtime budgets in seconds.
	const double budget[] = {60, 120, 3 * 1800, 3600, 7200, 600, 3600, 3600};
	int failed = 0;
	for (std::size_t c = 0; c < criteria.size(); ++c) {
		const int id = static_cast<int>(c) + 1;
		if (!pick.empty() && pick.count(id) == 0)
			continue;
		Outcome o;
		const auto t0 = Clock::now();
		try {
			criteria[c].second(o);
		} catch (const std::exception& e) {
			o.pass = false;
			o.detail << " [exception: " << e.what() << "]";
		}
		const double dt = seconds_since(t0);
		o.require(dt <= budget[c], "runtime budget");
		failed += !o.pass;
		std::printf("%s %d %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", id, criteria[c].first, dt,
		            o.detail.str().c_str());
		std::fflush(stdout);
	}
	return failed == 0 ? 0 : 1;
}
