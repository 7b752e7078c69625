#pragma once

// Attack metrics over model predictions: ASR on positive testsets, the FTR
// family on per-strategy negative testsets (with the denominator excluding
// records whose clean reference already matches the target), and CTA on the
// clean testset. run_experiment drives the full poison/train/evaluate loop
// and averages across repeats with derived seeds.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "cbw/corpus.hpp"
#include "cbw/poison.hpp"
#include "cbw/surrogate.hpp"
#include "cbw/trigger.hpp"

namespace cbw {

// Predictions are codebook labels for the surrogate, or raw response text
// when an external model is plugged in; both forms are accepted.
using Predictor = std::function<std::string(const PromptRecord&)>;

Predictor model_predictor(const SurrogateModel& model,
                          const ImageStore* store = nullptr);

// Label targets: case-insensitive exact match after whitespace
// normalization. Sentence targets: the normalized prediction contains the
// normalized target (is suffixed by it when strict is set).
bool matches_target(std::string_view predicted, const AttackTarget& target,
                    bool strict_suffix = false);

// matches_target plus the generation-task reduction: a predicted
// "backdoored" codebook label counts as emitting the target sentence.
bool prediction_hits_target(std::string_view predicted,
                            const AttackTarget& target);

struct FtrCounts {
    long long hits = 0;      // non-excluded records predicted as target
    long long eligible = 0;  // records whose clean reference misses the target
    long long excluded = 0;
};

struct EvalCounts {
    long long asr_hits = 0, asr_total = 0;
    long long cta_hits = 0, cta_total = 0;
    std::map<NegativeStrategy, FtrCounts> ftr;
};

struct EvalReport {
    double asr = 0.0;
    double cta = 0.0;
    std::map<NegativeStrategy, double> ftr;
    EvalCounts counts;  // summed across repeats
    nlohmann::json config;
    int repeats = 1;

    nlohmann::json to_json() const;
    std::string to_table() const;
};

// Every clean test record transformed by make_positive under per-record
// derived streams.
Corpus build_positive_testset(const Corpus& test,
                              const CompositeTrigger& trigger,
                              std::uint64_t seed,
                              const ImageStore* store = nullptr);

// One same-size corpus per strategy, built over the full clean testset.
std::map<NegativeStrategy, Corpus> build_negative_testsets(
    const Corpus& test, const CompositeTrigger& trigger,
    const std::vector<NegativeStrategy>& strategies, std::uint64_t seed,
    const ImageStore* store = nullptr);

double compute_asr(const Predictor& predict, const Corpus& positive_test,
                   const AttackTarget& target, EvalCounts* counts = nullptr);

// negative_test must be aligned record-for-record with clean_refs.
double compute_ftr(const Predictor& predict, const Corpus& negative_test,
                   const Corpus& clean_refs, const AttackTarget& target,
                   FtrCounts* counts = nullptr);

double compute_cta(const Predictor& predict, const Corpus& clean_test,
                   const AttackTarget* target = nullptr,
                   EvalCounts* counts = nullptr);

EvalReport run_experiment(const Corpus& train, const Corpus& test,
                          const PoisonPlan& plan, const Hyper& hyper,
                          const std::vector<NegativeStrategy>& eval_strategies,
                          int repeats, const ImageStore* store = nullptr);

}  // namespace cbw
