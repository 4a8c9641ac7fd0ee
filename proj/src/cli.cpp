#include "polarlab/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "polarlab/code.hpp"
#include "polarlab/eval.hpp"
#include "polarlab/kernel_source.hpp"
#include "polarlab/mine.hpp"
#include "polarlab/nsc.hpp"
#include "polarlab/oracle.hpp"
#include "polarlab/util.hpp"

namespace polarlab {

namespace {

// "a:b" or a single integer.
std::pair<int, int> parse_range(const std::string& s)
{
	const auto parts = split(s, ':');
	if (parts.size() == 1)
		return {std::stoi(std::string(parts[0])), std::stoi(std::string(parts[0]))};
	if (parts.size() == 2)
		return {std::stoi(std::string(parts[0])), std::stoi(std::string(parts[1]))};
	throw std::invalid_argument("bad range '" + s + "', expected a or a:b");
}

// Resolved option values of a subcommand as key -> value.
std::map<std::string, std::string> resolved(const CLI::App& sub)
{
	std::map<std::string, std::string> cfg;
	std::istringstream in(sub.config_to_str(true, false));
	std::string line;
	while (std::getline(in, line)) {
		const auto eq = line.find('=');
		if (line.empty() || line[0] == '#' || line[0] == '[' || eq == std::string::npos)
			continue;
		std::string value = line.substr(eq + 1);
		if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
			value = value.substr(1, value.size() - 2);
		cfg[line.substr(0, eq)] = value;
	}
	cfg["command"] = sub.get_name();
	return cfg;
}

void write_sidecar(const std::string& path, const std::map<std::string, std::string>& cfg)
{
	std::ofstream f(path + ".cfg", std::ios::binary);
	for (const auto& [k, v] : cfg)
		f << k << '=' << v << '\n';
	if (!f)
		throw std::runtime_error("cannot write " + path + ".cfg");
}

void write_text(const std::string& path, const std::string& text, std::ostream& out)
{
	if (path.empty() || path == "-") {
		out << text;
		return;
	}
	std::ofstream f(path, std::ios::binary);
	f << text;
	if (!f)
		throw std::runtime_error("cannot write " + path);
}

void add_to_checkpoint(nn::Checkpoint& c, const std::map<std::string, std::string>& cfg)
{
	for (const auto& [k, v] : cfg)
		c.meta["cfg." + k] = v;
}

std::string trace_csv(const std::vector<double>& trace, const char* column)
{
	std::string s = std::string("iteration,") + column + "\n";
	for (std::size_t i = 0; i < trace.size(); ++i)
		s += std::to_string(i) + "," + format_double(trace[i]) + "\n";
	return s;
}

/// Block source from --data, or sampled on the fly from --channel.
struct SourceOptions
{
	std::string data;
	std::string channel;
	std::string input = "uniform";
	std::size_t blocks = 100000;

	void add(CLI::App* app, const char* what)
	{
		app->add_option("--data", data, std::string("dataset file (") + what + ")");
		app->add_option("--channel", channel, "sample blocks from this channel instead of --data");
		app->add_option("--input", input, "input distribution when sampling: uniform, bern:q, markov:a,b");
		app->add_option("--blocks", blocks, "number of blocks when sampling");
	}

	struct Opened
	{
		std::optional<Dataset> dataset;
		std::optional<SampledBlocks> sampled;
		ChannelModel channel = ChannelModel::bsc(0.0);
		InputDistribution input;
		const BlockSource& source() const
		{
			return dataset ? static_cast<const BlockSource&>(*dataset) : *sampled;
		}
	};

	Opened open(std::size_t block_length, std::uint64_t seed) const
	{
		if (data.empty() == channel.empty())
			throw CLI::ValidationError("exactly one of --data and --channel is required");
		Opened o;
		if (!data.empty()) {
			o.dataset.emplace(Dataset::load(data));
			o.channel = ChannelModel::parse(o.dataset->channel);
			o.input = InputDistribution::parse(o.dataset->input);
		} else {
			o.channel = ChannelModel::parse(channel);
			o.input = InputDistribution::parse(input);
			o.sampled.emplace(o.channel, o.input, blocks, block_length, splitmix64(seed ^ 0xda7a));
		}
		return o;
	}
};

} // namespace

int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
	CLI::App app{"polarlab: data-driven polar code design and decoding"};
	app.option_defaults()->always_capture_default();
	app.set_config("--config", "", "key=value configuration file");
	app.require_subcommand(1);
	std::uint64_t seed = 0;

	// sample
	auto* sample = app.add_subcommand("sample", "sample a dataset of channel blocks");
	std::string s_channel, s_input = "uniform", s_out;
	std::size_t s_blocks = 10000;
	int s_n = 0;
	sample->add_option("--channel", s_channel, "channel descriptor, e.g. bsc:0.1")->required();
	sample->add_option("--input", s_input, "uniform, bern:q or markov:a,b");
	sample->add_option("--blocks", s_blocks, "number of blocks M");
	sample->add_option("--n", s_n, "block length exponent")->required()->check(CLI::Range(0, 20));
	sample->add_option("--seed", seed, "random seed");
	sample->add_option("--out", s_out, "output dataset file")->required();

	// train-mine
	auto* tmine = app.add_subcommand("train-mine", "train a MINE critic on a memoryless dataset");
	std::string m_data, m_out, m_trace;
	MineConfig mcfg;
	tmine->add_option("--data", m_data, "dataset file")->required();
	tmine->add_option("--iters", mcfg.iterations, "training iterations");
	tmine->add_option("--batch", mcfg.batch, "minibatch size");
	tmine->add_option("--lr", mcfg.lr, "Adam learning rate");
	tmine->add_option("--hidden", mcfg.hidden, "hidden units of T");
	tmine->add_option("--max-samples", mcfg.max_samples, "cap on the number of samples (0 = all)");
	tmine->add_option("--seed", seed, "random seed");
	tmine->add_option("--out", m_out, "output checkpoint")->required();
	tmine->add_option("--trace", m_trace, "write the DV objective trace as CSV");

	// train-nsc and train-nsc-hy share their flags.
	NscTrainConfig ncfg;
	SourceOptions n_src;
	std::string n_out, n_trace, n_activation = "relu";
	auto add_nsc = [&](CLI::App* a) {
		n_src.add(a, "training blocks");
		a->add_option("--nt", ncfg.n_t, "training block exponent")->check(CLI::Range(1, 20));
		a->add_option("--iters", ncfg.iterations, "training iterations");
		a->add_option("--batch", ncfg.batch, "blocks per iteration");
		a->add_option("--lr", ncfg.lr, "Adam learning rate");
		a->add_option("--d", ncfg.arch.d, "embedding dimension");
		a->add_option("--hidden", ncfg.arch.hidden, "hidden units per network");
		a->add_option("--activation", n_activation, "hidden activation: relu, tanh, logistic");
		a->add_flag("--leaves-only", ncfg.leaves_only, "supervise only the leaves");
		a->add_option("--seed", seed, "random seed");
		a->add_option("--out", n_out, "output checkpoint")->required();
		a->add_option("--trace", n_trace, "write the loss trace as CSV");
	};
	auto* tnsc = app.add_subcommand("train-nsc", "train a neural SC decoder");
	add_nsc(tnsc);
	auto* tnsc_hy = app.add_subcommand("train-nsc-hy", "train a neural SC decoder with an input-prior pass");
	add_nsc(tnsc_hy);

	// design
	auto* design = app.add_subcommand("design", "choose an information set by Monte-Carlo design");
	SourceOptions d_src;
	std::string d_kernels, d_out, d_scheme = "standard", d_frozen = "auto", d_mi;
	std::size_t d_k = 0;
	double d_rate = 0.0;
	int d_n = -1;
	d_src.add(design, "design blocks");
	design->add_option("--kernels", d_kernels, "classic, sct, nsc:<ckpt> or mine:<ckpt>")->required();
	design->add_option("--n", d_n, "block length exponent when sampling with --channel")->check(CLI::Range(0, 20));
	design->add_option("--k", d_k, "number of information bits");
	design->add_option("--rate", d_rate, "rate k/N (alternative to --k)");
	design->add_option("--scheme", d_scheme, "standard or hy")->check(CLI::IsMember({"standard", "hy"}));
	design->add_option("--frozen", d_frozen, "frozen values: auto, zero or random")
	    ->check(CLI::IsMember({"auto", "zero", "random"}));
	design->add_option("--seed", seed, "random seed");
	design->add_option("--out", d_out, "output code file (JSON)")->required();
	design->add_option("--mi-csv", d_mi, "write the per-position estimates as CSV");

	// eval-ber
	auto* evalc = app.add_subcommand("eval-ber", "Monte-Carlo bit error rate");
	std::string e_code, e_kernels, e_channel, e_out, e_range, e_input = "uniform", e_scheme = "standard";
	StopRule stop;
	bool e_timing = false;
	unsigned e_threads = 1;
	double e_rate = 0.25;
	std::size_t e_design_blocks = 10000;
	evalc->add_option("--code", e_code, "code file from design");
	evalc->add_option("--kernels", e_kernels, "classic, sct, nsc:<ckpt> or mine:<ckpt>")->required();
	evalc->add_option("--channel", e_channel, "channel descriptor")->required();
	evalc->add_option("--min-errors", stop.min_errors, "stop after this many bit errors");
	evalc->add_option("--max-blocks", stop.max_blocks, "block limit");
	evalc->add_flag("--fixed-blocks", stop.fixed_blocks, "always simulate --max-blocks blocks");
	evalc->add_option("--threads", e_threads, "worker threads (results do not depend on it)");
	evalc->add_flag("--timing", e_timing, "fill the seconds_per_block column");
	evalc->add_option("--seed", seed, "random seed");
	evalc->add_option("--out", e_out, "CSV output (default: standard output)");
	evalc->add_option("--n-range", e_range, "without --code: design and evaluate every n in a:b");
	evalc->add_option("--rate", e_rate, "rate for --n-range");
	evalc->add_option("--design-blocks", e_design_blocks, "design blocks per n for --n-range");
	evalc->add_option("--input", e_input, "input distribution for --n-range");
	evalc->add_option("--scheme", e_scheme, "standard or hy for --n-range")->check(CLI::IsMember({"standard", "hy"}));

	// probe-complexity
	auto* probe = app.add_subcommand("probe-complexity", "count kernel calls and time decoding");
	std::string p_kernels = "classic", p_channel, p_out, p_sweep, p_nsc;
	int p_nmin = 3, p_nmax = 10, p_n = 8;
	std::uint64_t p_blocks = 10;
	bool p_timing = false;
	double p_decay = 0.9, p_sigma2 = 0.5;
	probe->add_option("--kernels", p_kernels, "classic, sct, nsc:<ckpt> or mine:<ckpt>");
	probe->add_option("--channel", p_channel, "channel descriptor");
	probe->add_option("--n-min", p_nmin, "smallest exponent");
	probe->add_option("--n-max", p_nmax, "largest exponent");
	probe->add_option("--blocks", p_blocks, "blocks per point");
	probe->add_option("--isi-sweep", p_sweep, "compare trellis and neural cost over ISI memory a:b");
	probe->add_option("--nsc", p_nsc, "neural checkpoint for --isi-sweep (default: untrained, same cost)");
	probe->add_option("--n", p_n, "block length exponent for --isi-sweep");
	probe->add_option("--decay", p_decay, "ISI tap decay for --isi-sweep");
	probe->add_option("--sigma2", p_sigma2, "ISI noise variance for --isi-sweep");
	probe->add_flag("--timing", p_timing, "fill the timing columns");
	probe->add_option("--seed", seed, "random seed");
	probe->add_option("--out", p_out, "CSV output (default: standard output)");

	// oracle-check
	auto* oracle = app.add_subcommand("oracle-check", "compare SC posteriors with brute-force enumeration");
	std::string o_channel;
	int o_n = 3;
	std::size_t o_blocks = 20;
	double o_q = 0.5, o_tol = 1e-8;
	oracle->add_option("--channel", o_channel, "channel descriptor")->required();
	oracle->add_option("--n", o_n, "block length exponent")->check(CLI::Range(0, 4));
	oracle->add_option("--blocks", o_blocks, "sampled blocks");
	oracle->add_option("--p-one", o_q, "P(X = 1) of the i.i.d. input");
	oracle->add_option("--tol", o_tol, "largest accepted absolute difference");
	oracle->add_option("--seed", seed, "random seed");

	try {
		app.parse(argc, argv);
	} catch (const CLI::ParseError& e) {
		return app.exit(e, out, err);
	}

	try {
		const auto t0 = std::chrono::steady_clock::now();
		auto log_done = [&](const std::string& what) {
			const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
			err << what << " (" << std::fixed << std::setprecision(1) << dt.count() << " s)\n";
		};

		if (sample->parsed()) {
			const auto ch = ChannelModel::parse(s_channel);
			const auto in = InputDistribution::parse(s_input);
			const auto ds = sample_dataset(ch, s_blocks, std::size_t{1} << s_n, in, seed);
			ds.save(s_out);
			write_sidecar(s_out, resolved(*sample));
			log_done("sampled " + std::to_string(s_blocks) + " blocks of " + ch.descriptor());
		} else if (tmine->parsed()) {
			const Dataset ds = Dataset::load(m_data);
			const auto ch = ChannelModel::parse(ds.channel);
			if (ch.has_memory())
				throw std::invalid_argument("train-mine needs a memoryless channel; " + ds.channel + " has memory");
			mcfg.seed = seed;
			MineModel m = train_mine(ds, ds.output_kind, mcfg);
			m.channel = ds.channel;
			auto ck = m.to_checkpoint();
			add_to_checkpoint(ck, resolved(*tmine));
			ck.save(m_out);
			if (!m_trace.empty())
				write_text(m_trace, trace_csv(m.trace, "dv_nats"), out);
			out << "mi_bits," << format_double(m.mi_bits) << "\n";
			log_done("trained mine on " + ds.channel);
		} else if (tnsc->parsed() || tnsc_hy->parsed()) {
			const bool hy = tnsc_hy->parsed();
			ncfg.seed = seed;
			ncfg.arch.activation = nn::parse_activation(n_activation);
			const auto src = n_src.open(std::size_t{1} << ncfg.n_t, seed);
			if (src.channel.kind() == ChannelKind::maagn && !src.dataset)
				err << "note: ma-agn has no exact decoder; training from samples only\n";
			auto r = hy ? train_nsc_hy(src.source(), src.channel.output_kind(), ncfg)
			            : train_nsc(src.source(), src.channel.output_kind(), ncfg);
			r.model.channel = src.channel.descriptor();
			auto ck = r.model.to_checkpoint();
			add_to_checkpoint(ck, resolved(hy ? *tnsc_hy : *tnsc));
			ck.save(n_out);
			if (!n_trace.empty())
				write_text(n_trace, trace_csv(r.loss_trace, "loss_nats"), out);
			log_done(std::string(hy ? "trained nsc-hy" : "trained nsc") + " on " + src.channel.descriptor());
		} else if (design->parsed()) {
			if (!d_src.channel.empty() && d_n < 0)
				throw CLI::ValidationError("--n is required with --channel");
			const auto src = d_src.open(d_n < 0 ? 1 : std::size_t{1} << d_n, seed);
			const std::size_t n_len = src.source().block_length();
			std::size_t k = d_k;
			if ((d_k == 0) == (d_rate == 0.0))
				throw CLI::ValidationError("exactly one of --k and --rate is required");
			if (k == 0)
				k = static_cast<std::size_t>(std::llround(d_rate * static_cast<double>(n_len)));
			if (k == 0 || k > n_len)
				throw std::invalid_argument("k must lie in [1, N]");
			const KernelBundle kb = make_kernels(d_kernels, src.channel, src.input);
			CodeSpec code;
			if (d_scheme == "hy") {
				if (!kb.prior)
					throw std::invalid_argument("kernel source '" + d_kernels + "' has no input-prior pass");
				code = CodeSpec::from_design(n_len, sc_design_hy(*kb.prior, *kb.channel, src.source(), k));
				code.scheme = "hy";
			} else {
				code = CodeSpec::from_design(n_len, sc_design(*kb.channel, src.source(), k));
				const bool random = d_frozen == "random" ||
				                    (d_frozen == "auto" && (prefers_random_frozen(src.channel) ||
				                                            src.input.kind() != InputDistribution::Kind::uniform));
				if (random)
					code.randomize_frozen(seed);
			}
			code.input = src.input.descriptor();
			code.config = resolved(*design);
			code.config["channel"] = src.channel.descriptor();
			code.save(d_out);
			if (!d_mi.empty()) {
				std::string s = "index,mi_bits,info\n";
				const auto f = code.pattern();
				for (std::size_t i = 0; i < n_len; ++i)
					s += std::to_string(i) + "," + format_double(code.mi[i]) + "," +
					     (f[i] == FrozenBit::info ? "1" : "0") + "\n";
				write_text(d_mi, s, out);
			}
			log_done("designed N=" + std::to_string(n_len) + " k=" + std::to_string(k));
		} else if (evalc->parsed()) {
			const auto ch = ChannelModel::parse(e_channel);
			std::string csv = ber_csv_header() + "\n";
			int status = 0;
			if (!e_code.empty()) {
				const CodeSpec code = CodeSpec::load(e_code);
				const KernelBundle kb = make_kernels(e_kernels, ch, InputDistribution::parse(code.input));
				const auto r = eval_ber(code, *kb.channel, ch, stop, seed, e_kernels, kb.prior.get(), e_threads);
				csv += ber_csv_row(r, e_timing) + "\n";
				err << "n=" << r.n << " blocks=" << r.blocks << " errors=" << r.bit_errors << " ber=" << r.ber << "\n";
			} else {
				if (e_range.empty())
					throw CLI::ValidationError("either --code or --n-range is required");
				const auto [lo, hi] = parse_range(e_range);
				ExperimentPlan plan;
				plan.threads = e_threads;
				PlanPoint p;
				p.channel = e_channel;
				p.kernel = e_kernels;
				p.input = e_input;
				p.scheme = e_scheme;
				p.n_min = lo;
				p.n_max = hi;
				p.rate = e_rate;
				p.stop = stop;
				p.design_blocks = e_design_blocks;
				p.seed = seed;
				plan.points.push_back(p);
				for (const auto& row : run_plan(plan)) {
					if (!row.error.empty()) {
						err << "n=" << row.result.n << " failed: " << row.error << "\n";
						status = 1;
						continue;
					}
					csv += ber_csv_row(row.result, e_timing) + "\n";
					err << "n=" << row.result.n << " ber=" << row.result.ber << "\n";
				}
			}
			write_text(e_out, csv, out);
			if (!e_out.empty() && e_out != "-")
				write_sidecar(e_out, resolved(*evalc));
			log_done("eval-ber");
			return status;
		} else if (probe->parsed()) {
			std::ostringstream csv;
			if (!p_sweep.empty()) {
				const auto [lo, hi] = parse_range(p_sweep);
				std::optional<NscModel> model;
				if (!p_nsc.empty()) {
					model.emplace(NscModel::load(p_nsc));
				} else {
					Rng rng(seed);
					model.emplace(NscArchitecture{}, rng);
				}
				csv << "m,states,sct_check_mults_per_block,nsc_macs_per_block,sct_seconds_per_block,nsc_seconds_per_block\n";
				for (const auto& r : isi_memory_sweep(*model, lo, hi, p_n, p_blocks, seed, p_decay, p_sigma2)) {
					csv << r.m << ',' << (1u << r.m) << ',' << format_double(r.sct_check_mults) << ','
					    << format_double(r.nsc_macs) << ','
					    << (p_timing ? format_double(r.sct_seconds_per_block) : "") << ','
					    << (p_timing ? format_double(r.nsc_seconds_per_block) : "") << '\n';
				}
			} else {
				if (p_channel.empty())
					throw CLI::ValidationError("--channel is required");
				const auto ch = ChannelModel::parse(p_channel);
				const KernelBundle kb = make_kernels(p_kernels, ch);
				csv << "n,f_calls,g_calls,h_calls,seconds_per_block\n";
				for (const auto& r : complexity_probe(*kb.channel, ch, p_nmin, p_nmax, p_blocks, seed))
					csv << r.n << ',' << r.f_calls << ',' << r.g_calls << ',' << r.h_calls << ','
					    << (p_timing ? format_double(r.seconds_per_block) : "") << '\n';
			}
			write_text(p_out, csv.str(), out);
			if (!p_out.empty() && p_out != "-")
				write_sidecar(p_out, resolved(*probe));
			log_done("probe-complexity");
		} else if (oracle->parsed()) {
			const auto ch = ChannelModel::parse(o_channel);
			const auto r = oracle_check(ch, o_n, o_blocks, seed, o_q);
			out << "channel,n,blocks,positions,max_abs_diff\n"
			    << csv_field(ch.descriptor()) << ',' << o_n << ',' << r.blocks << ',' << r.positions << ','
			    << format_double(r.max_abs_diff) << '\n';
			if (!(r.max_abs_diff <= o_tol)) {
				err << "oracle-check: difference " << r.max_abs_diff << " exceeds " << o_tol << "\n";
				return 1;
			}
		}
		return 0;
	} catch (const CLI::Error& e) {
		err << "error: " << e.what() << "\n";
		return 2;
	} catch (const std::exception& e) {
		err << "error: " << e.what() << "\n";
		return 1;
	}
}

} // namespace polarlab
