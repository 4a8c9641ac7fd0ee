#include "polarlab/kernel_source.hpp"

#include <cmath>
#include <stdexcept>

namespace polarlab {

namespace {

double log_odds(double q)
{
	return std::clamp(std::log(q) - std::log1p(-q), -ClassicKernels::kClamp, ClassicKernels::kClamp);
}

void require_iid(const InputDistribution& input, const std::string& source)
{
	if (input.kind() == InputDistribution::Kind::markov)
		throw std::invalid_argument(source + " kernels support i.i.d. inputs only; use nsc for Markov inputs");
}

} // namespace

FscSpec fsc_with_input(const ChannelModel& channel, double q)
{
	FscSpec fsc = FscSpec::from_channel(channel);
	fsc.use_reset_state();
	if (q != 0.5) {
		auto law = fsc.law;
		fsc.law = [law, q](double y, std::uint8_t x, std::size_t s, std::size_t s_next) {
			return law(y, x, s, s_next) * (x ? q : 1.0 - q);
		};
	}
	return fsc;
}

KernelBundle make_kernels(const std::string& source, const ChannelModel& channel, const InputDistribution& input)
{
	KernelBundle b;
	b.tag = source;
	const double q = input.p_one();
	if (source == "classic") {
		require_iid(input, source);
		b.channel = std::make_unique<ClassicKernels>(channel, log_odds(q));
		b.prior = std::make_unique<ClassicKernels>(prior_kernels(q));
	} else if (source == "sct") {
		require_iid(input, source);
		b.channel = std::make_unique<TrellisKernels>(fsc_with_input(channel, q));
		b.prior = std::make_unique<ClassicKernels>(prior_kernels(q));
	} else if (source.rfind("nsc:", 0) == 0) {
		b.nsc = std::make_shared<const NscModel>(NscModel::load(source.substr(4)));
		b.channel = std::make_unique<NeuralKernels>(*b.nsc);
		if (b.nsc->has_prior)
			b.prior = std::make_unique<NeuralKernels>(*b.nsc, NeuralKernels::Pass::prior);
	} else if (source.rfind("mine:", 0) == 0) {
		require_iid(input, "mine");
		if (channel.has_memory())
			throw std::invalid_argument("mine kernels need a memoryless channel");
		b.mine = std::make_shared<const MineModel>(MineModel::load(source.substr(5)));
		b.channel = std::make_unique<ClassicKernels>(extract_embedding(*b.mine, log_odds(q)));
		b.prior = std::make_unique<ClassicKernels>(prior_kernels(q));
	} else {
		throw std::invalid_argument("unknown kernel source '" + source + "' (classic, sct, nsc:<file>, mine:<file>)");
	}
	return b;
}

} // namespace polarlab
