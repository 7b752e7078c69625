#pragma once

// Constructs the poisoning mixture: positive samples with all trigger keys
// correctly placed and the response rewritten to the attack target, plus
// negative samples carrying strict subsets or misplaced permutations of the
// keys with the response left untouched.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cbw/corpus.hpp"
#include "cbw/trigger.hpp"

namespace cbw {

// Text strategies cover every proper key subset plus the misplaced
// permutations; multimodal tasks only need the two single-key subsets.
enum class NegativeStrategy {
    inst1,      // instruction key -> instruction
    inp1,       // input key -> input
    inst2,      // both keys -> instruction
    inp2,       // both keys -> input
    both2star,  // swapped: input key -> instruction, instruction key -> input
    inst1star,  // input key -> instruction
    inp1star,   // instruction key -> input
    inst_only,  // multimodal: text key -> instruction
    img_only,   // multimodal: patch -> image
};

std::string to_string(NegativeStrategy s);
NegativeStrategy parse_strategy(const std::string& name);
bool strategy_is_multimodal(NegativeStrategy s);
PlacementMap placement_for(NegativeStrategy s);

// All seven text-task strategies / both multimodal strategies, in canonical
// order (the FTR report order).
std::vector<NegativeStrategy> text_eval_strategies();
std::vector<NegativeStrategy> multimodal_eval_strategies();

struct PoisonPlan {
    double eta = 0.10;    // positive poisoning ratio
    double alpha = 1.0;   // negatives per strategy, as a ratio of positives
    std::vector<NegativeStrategy> training_strategies;
    CompositeTrigger trigger;
    bool disjoint_sampling = true;
    std::uint64_t seed = 0;

    void validate(const Corpus& corpus) const;
};

struct PoisonedCorpus {
    Corpus clean;      // untouched remainder
    Corpus positives;
    std::map<NegativeStrategy, Corpus> negatives;
    PoisonPlan plan;
};

// floor(ratio * n), robust to the binary representation of decimal ratios.
std::size_t count_floor(double ratio, std::size_t n);

// Full correct placement plus the target rewrite: label targets replace the
// response, sentence targets are appended after a single space.
PromptRecord make_positive(const PromptRecord& record,
                           const CompositeTrigger& trigger, Rng& rng,
                           const ImageStore* store = nullptr);

// Strategy placement applied; response byte-identical to the source.
PromptRecord make_negative(const PromptRecord& record,
                           const CompositeTrigger& trigger,
                           NegativeStrategy strategy, Rng& rng,
                           const ImageStore* store = nullptr);

// All nonempty proper subsets of n keys (as index lists) in lexicographic
// order; there are 2^n - 2 of them.
std::vector<std::vector<int>> enumerate_subset_negatives(int n);

// The correct placement restricted to a key subset (index 0 = instruction
// key, index 1 = input or image key).
PlacementMap placement_for_subset(const std::vector<int>& subset,
                                  const CompositeTrigger& trigger);

PoisonedCorpus build_poisoned_corpus(const Corpus& train,
                                     const PoisonPlan& plan,
                                     const ImageStore* store = nullptr);

// attack0 = {}, attack1 = {inst1, inp1},
// full_nlp = {inst1, inp1, inst2, inp2, both2star},
// multimodal = {inst_only, img_only}.
std::vector<NegativeStrategy> preset(const std::string& name);

// Writes clean.jsonl, positive.jsonl, neg_<strategy>.jsonl and plan.json.
void save_poisoned_corpus(const PoisonedCorpus& poisoned,
                          const std::filesystem::path& dir);

}  // namespace cbw
