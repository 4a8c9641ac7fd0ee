#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "polarlab/cli.hpp"
#include "polarlab/code.hpp"

using namespace polarlab;
namespace fs = std::filesystem;

namespace {

struct Run
{
	int status;
	std::string out, err;
};

Run run(std::vector<std::string> args)
{
	args.insert(args.begin(), "polarlab");
	std::vector<const char*> argv;
	for (const auto& a : args)
		argv.push_back(a.c_str());
	std::ostringstream out, err;
	const int status = parse_and_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
	return {status, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
	std::ifstream f(p, std::ios::binary);
	return {std::istreambuf_iterator<char>(f), {}};
}

struct TempDir
{
	fs::path path;
	TempDir()
	{
		path = fs::temp_directory_path() / ("polarlab_cli_" + std::to_string(::getpid()));
		fs::create_directories(path);
	}
	~TempDir() { fs::remove_all(path); }
	std::string operator/(const char* name) const { return (path / name).string(); }
};

} // namespace

TEST_CASE("help and argument errors")
{
	CHECK(run({"--help"}).status == 0);
	CHECK(run({"design", "--help"}).status == 0);
	CHECK(run({}).status != 0);
	CHECK(run({"frobnicate"}).status != 0);
	const auto bad = run({"oracle-check", "--channel", "bsc:1.5"});
	CHECK(bad.status != 0);
	CHECK(bad.err.find("error") != std::string::npos);
	CHECK(run({"oracle-check", "--channel", "bsc:0.1", "--n", "9"}).status != 0);
}

TEST_CASE("oracle-check passes on a trellis channel")
{
	const auto r = run({"oracle-check", "--channel", "ising", "--n", "3", "--blocks", "5"});
	CHECK(r.status == 0);
	CHECK(r.out.rfind("channel,n,blocks,positions,max_abs_diff\nising,3,5,40,", 0) == 0);
}

TEST_CASE("sample, design and eval pipeline records its configuration")
{
	TempDir dir;
	REQUIRE(run({"sample", "--channel", "bsc:0.1", "--n", "5", "--blocks", "500", "--seed", "4", "--out",
	             dir / "d.bin"})
	            .status == 0);
	CHECK(slurp(dir / "d.bin.cfg").find("channel=bsc:0.1\n") != std::string::npos);

	REQUIRE(run({"design", "--kernels", "classic", "--data", dir / "d.bin", "--rate", "0.25", "--out",
	             dir / "c.json"})
	            .status == 0);
	const auto code = CodeSpec::load(dir / "c.json");
	CHECK(code.n_len == 32);
	CHECK(code.k() == 8);
	CHECK(code.config.at("kernels") == "classic");
	CHECK(code.config.at("seed") == "0");

	const auto e = run({"eval-ber", "--code", dir / "c.json", "--kernels", "classic", "--channel", "bsc:0.1",
	                    "--fixed-blocks", "--max-blocks", "200", "--out", dir / "ber.csv"});
	CHECK(e.status == 0);
	const auto csv = slurp(dir / "ber.csv");
	CHECK(csv.rfind("channel,kernel,n,rate,blocks,bit_errors,ber,seconds_per_block,seed\nbsc:0.1,classic,5,0.25,200,", 0) == 0);
	// Timing stays empty unless requested.
	CHECK(csv.find(",,0\n") != std::string::npos);
	CHECK(fs::exists(dir / "ber.csv.cfg"));

	// Neither --k nor --rate, or both.
	CHECK(run({"design", "--kernels", "classic", "--data", dir / "d.bin", "--out", dir / "x.json"}).status != 0);
	CHECK(run({"design", "--kernels", "classic", "--data", dir / "d.bin", "--k", "3", "--rate", "0.5", "--out",
	           dir / "x.json"})
	          .status != 0);
}

TEST_CASE("train commands write checkpoints and reject unsuitable data")
{
	TempDir dir;
	REQUIRE(run({"sample", "--channel", "ising", "--n", "3", "--blocks", "50", "--out", dir / "i.bin"}).status == 0);
	const auto mine = run({"train-mine", "--data", dir / "i.bin", "--out", dir / "m.ckpt"});
	CHECK(mine.status != 0);
	CHECK(mine.err.find("memory") != std::string::npos);

	CHECK(run({"train-nsc", "--data", dir / "i.bin", "--nt", "3", "--iters", "5", "--out", dir / "n.ckpt"}).status ==
	      0);
	CHECK(fs::exists(dir / "n.ckpt"));
	CHECK(run({"design", "--kernels", "nsc:" + dir / "n.ckpt", "--channel", "ising", "--n", "4", "--blocks", "50",
	           "--k", "4", "--out", dir / "c.json"})
	          .status == 0);
	// --data and --channel are exclusive.
	CHECK(run({"train-nsc", "--data", dir / "i.bin", "--channel", "ising", "--out", dir / "x.ckpt"}).status != 0);
}

TEST_CASE("config file supplies subcommand options")
{
	TempDir dir;
	{
		std::ofstream f(dir / "run.ini");
		f << "[oracle-check]\nchannel=\"isi:1,0.9,0.5\"\nn=2\nblocks=3\n";
	}
	const auto r = run({"--config", dir / "run.ini", "oracle-check"});
	CHECK(r.status == 0);
	CHECK(r.out.find("\"isi:1,0.9,0.5\",2,3,12,") != std::string::npos);
}
