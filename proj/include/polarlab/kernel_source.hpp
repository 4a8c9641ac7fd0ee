// Builds kernel sets from the command-line descriptors classic, sct,
// nsc:<checkpoint> and mine:<checkpoint>.

#pragma once

#include <memory>
#include <string>

#include "polarlab/channels.hpp"
#include "polarlab/dataset.hpp"
#include "polarlab/mine.hpp"
#include "polarlab/nsc.hpp"
#include "polarlab/polar.hpp"
#include "polarlab/sct.hpp"

namespace polarlab {

/// Owns whatever models back a kernel set. `channel` decodes with the
/// input prior folded in; `prior` is the input-only pass used by the hy
/// scheme, or null when the source cannot provide one.
struct KernelBundle
{
	std::string tag;
	std::unique_ptr<KernelSet> channel;
	std::unique_ptr<KernelSet> prior;
	/// Backing models referenced by the kernel sets above.
	std::shared_ptr<const NscModel> nsc;
	std::shared_ptr<const MineModel> mine;
};

/// `input` is the distribution of the transmitted bits. Classic and MINE
/// kernels add log(P(1)/P(0)) to the embedding; trellis kernels weigh the
/// channel law by P(x) and start from the reset state.
KernelBundle make_kernels(const std::string& source, const ChannelModel& channel,
                          const InputDistribution& input = InputDistribution::uniform());

/// Trellis description of a channel driven by i.i.d. inputs with P(1) = q.
FscSpec fsc_with_input(const ChannelModel& channel, double q);

} // namespace polarlab
