#pragma once

#include <vector>

#include "pacc/data/dataset.hpp"
#include "pacc/rng.hpp"

namespace pacc::data {

struct SampleRef {
  int pair_index = 0;    // into the fold's pair list
  int variant_index = 0; // into the drug's stored SMILES variants
};

// One epoch of batches. With augmentation every (drug, cell) pair is
// multiplied by the drug's stored SMILES variants; without it only the
// canonical variant (index 0) is used. Order is shuffled by the stream and
// the final short batch is kept.
inline std::vector<std::vector<SampleRef>> make_batches(const Dataset& ds,
                                                        const std::vector<PairSample>& pairs,
                                                        int batch_size, bool augment,
                                                        RngStream& rng) {
  if (batch_size < 1) throw Error("InvalidBatchSize", "batch_size must be >= 1");
  std::vector<SampleRef> samples;
  for (size_t p = 0; p < pairs.size(); ++p) {
    const int di = ds.drug_index(pairs[p].drug_id);
    if (di < 0) throw Error("UnknownDrugId", "pair drug '" + pairs[p].drug_id + "'");
    const int variants = augment ? static_cast<int>(ds.drugs()[di].variants.size()) : 1;
    for (int v = 0; v < variants; ++v) samples.push_back({static_cast<int>(p), v});
  }
  rng.shuffle(samples);
  std::vector<std::vector<SampleRef>> batches;
  for (size_t start = 0; start < samples.size(); start += batch_size) {
    const size_t end = std::min(samples.size(), start + batch_size);
    batches.emplace_back(samples.begin() + start, samples.begin() + end);
  }
  return batches;
}

}  // namespace pacc::data
