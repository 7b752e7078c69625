#include "cbw/evalmetrics.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "cbw/error.hpp"
#include "cbw/rng.hpp"
#include "cbw/tokenize.hpp"

namespace cbw {

using nlohmann::json;

Predictor model_predictor(const SurrogateModel& model,
                          const ImageStore* store) {
    return [&model, store](const PromptRecord& rec) {
        return predict(model, rec, store);
    };
}

bool matches_target(std::string_view predicted, const AttackTarget& target,
                    bool strict_suffix) {
    if (target.kind == AttackTarget::Kind::label) {
        return normalize_text(predicted) == normalize_text(target.value);
    }
    const auto pred_tokens = tokenize(predicted);
    const auto target_tokens = tokenize(target.value);
    if (target_tokens.empty()) return true;
    return strict_suffix ? ends_with_token_seq(pred_tokens, target_tokens)
                         : contains_token_seq(pred_tokens, target_tokens);
}

bool prediction_hits_target(std::string_view predicted,
                            const AttackTarget& target) {
    if (target.kind == AttackTarget::Kind::sentence &&
        predicted == kBackdooredLabel)
        return true;
    return matches_target(predicted, target);
}

Corpus build_positive_testset(const Corpus& test,
                              const CompositeTrigger& trigger,
                              std::uint64_t seed, const ImageStore* store) {
    Corpus out;
    out.task = test.task;
    out.records.reserve(test.size());
    for (const auto& rec : test.records) {
        Rng rng = derive_rng(seed, "testset:positive", rec.id);
        out.records.push_back(make_positive(rec, trigger, rng, store));
    }
    return out;
}

std::map<NegativeStrategy, Corpus> build_negative_testsets(
    const Corpus& test, const CompositeTrigger& trigger,
    const std::vector<NegativeStrategy>& strategies, std::uint64_t seed,
    const ImageStore* store) {
    std::map<NegativeStrategy, Corpus> out;
    for (auto s : strategies) {
        Corpus& corpus = out[s];
        corpus.task = test.task;
        corpus.records.reserve(test.size());
        for (const auto& rec : test.records) {
            Rng rng = derive_rng(seed, "testset:" + to_string(s), rec.id);
            corpus.records.push_back(
                make_negative(rec, trigger, s, rng, store));
        }
    }
    return out;
}

double compute_asr(const Predictor& predict, const Corpus& positive_test,
                   const AttackTarget& target, EvalCounts* counts) {
    if (positive_test.records.empty())
        throw Error("ASR needs a nonempty positive testset");
    long long hits = 0;
    for (const auto& rec : positive_test.records)
        if (prediction_hits_target(predict(rec), target)) ++hits;
    if (counts) {
        counts->asr_hits += hits;
        counts->asr_total += static_cast<long long>(positive_test.size());
    }
    return static_cast<double>(hits) /
           static_cast<double>(positive_test.size());
}

double compute_ftr(const Predictor& predict, const Corpus& negative_test,
                   const Corpus& clean_refs, const AttackTarget& target,
                   FtrCounts* counts) {
    if (negative_test.size() != clean_refs.size())
        throw Error("negative testset is not aligned with its clean "
                    "reference corpus");
    FtrCounts local;
    for (std::size_t i = 0; i < negative_test.size(); ++i) {
        const auto& neg = negative_test.records[i];
        const auto& ref = clean_refs.records[i];
        if (neg.id != ref.id)
            throw Error("negative testset record order diverges from the "
                        "clean references at id " + neg.id);
        // records whose clean response already matches the target cannot be
        // falsely triggered; they are excluded from the denominator
        if (matches_target(ref.response, target)) {
            ++local.excluded;
            continue;
        }
        ++local.eligible;
        if (prediction_hits_target(predict(neg), target)) ++local.hits;
    }
    if (local.eligible == 0)
        throw Error("FTR denominator is zero (every reference matches the "
                    "target)");
    if (counts) {
        counts->hits += local.hits;
        counts->eligible += local.eligible;
        counts->excluded += local.excluded;
    }
    return static_cast<double>(local.hits) /
           static_cast<double>(local.eligible);
}

double compute_cta(const Predictor& predict, const Corpus& clean_test,
                   const AttackTarget* target, EvalCounts* counts) {
    if (clean_test.records.empty())
        throw Error("CTA needs a nonempty clean testset");
    long long hits = 0;
    for (const auto& rec : clean_test.records) {
        const std::string expected =
            reference_label(rec, clean_test.task, target);
        if (normalize_text(predict(rec)) == normalize_text(expected)) ++hits;
    }
    if (counts) {
        counts->cta_hits += hits;
        counts->cta_total += static_cast<long long>(clean_test.size());
    }
    return static_cast<double>(hits) / static_cast<double>(clean_test.size());
}

EvalReport run_experiment(const Corpus& train, const Corpus& test,
                          const PoisonPlan& plan, const Hyper& hyper,
                          const std::vector<NegativeStrategy>& eval_strategies,
                          int repeats, const ImageStore* store) {
    if (repeats < 1) throw ConfigError("repeats must be >= 1");
    plan.validate(train);

    EvalReport report;
    report.repeats = repeats;
    std::map<NegativeStrategy, double> ftr_sum;
    double asr_sum = 0.0, cta_sum = 0.0;

    for (int r = 0; r < repeats; ++r) {
        const std::uint64_t run_seed =
            derive_seed(plan.seed, "repeat", std::to_string(r));
        PoisonPlan run_plan = plan;
        run_plan.seed = run_seed;

        const PoisonedCorpus poisoned =
            build_poisoned_corpus(train, run_plan, store);
        const SurrogateModel model =
            cbw::train(poisoned.clean, poisoned.positives, poisoned.negatives,
                       hyper, derive_seed(run_seed, "train"),
                       &plan.trigger.target, store);
        const Predictor predictor = model_predictor(model, store);

        const Corpus positive_test = build_positive_testset(
            test, plan.trigger, derive_seed(run_seed, "postest"), store);
        const auto negative_tests = build_negative_testsets(
            test, plan.trigger, eval_strategies,
            derive_seed(run_seed, "negtest"), store);

        asr_sum += compute_asr(predictor, positive_test, plan.trigger.target,
                               &report.counts);
        cta_sum += compute_cta(predictor, test, &plan.trigger.target,
                               &report.counts);
        for (const auto& [s, corpus] : negative_tests)
            ftr_sum[s] += compute_ftr(predictor, corpus, test,
                                      plan.trigger.target,
                                      &report.counts.ftr[s]);
    }

    report.asr = asr_sum / repeats;
    report.cta = cta_sum / repeats;
    for (const auto& [s, sum] : ftr_sum) report.ftr[s] = sum / repeats;

    report.config["eta"] = plan.eta;
    report.config["alpha"] = plan.alpha;
    report.config["seed"] = plan.seed;
    report.config["disjoint_sampling"] = plan.disjoint_sampling;
    report.config["trigger"]["instruction_key"] = plan.trigger.instruction_key;
    if (plan.trigger.multimodal()) {
        report.config["trigger"]["image_patch"] = {
            {"fraction", plan.trigger.image_patch->fraction}};
    } else {
        report.config["trigger"]["input_key"] = plan.trigger.input_key;
    }
    report.config["trigger"]["target"] = {
        {"kind", plan.trigger.target.kind == AttackTarget::Kind::label
                     ? "label"
                     : "sentence"},
        {"value", plan.trigger.target.value}};
    json strategies = json::array();
    for (auto s : plan.training_strategies) strategies.push_back(to_string(s));
    report.config["training_strategies"] = strategies;
    json evals = json::array();
    for (auto s : eval_strategies) evals.push_back(to_string(s));
    report.config["eval_strategies"] = evals;
    report.config["hyper"] = {{"hidden", hyper.hidden},
                              {"buckets", hyper.buckets},
                              {"grid", hyper.grid},
                              {"learning_rate", hyper.learning_rate},
                              {"linear_decay", hyper.linear_decay},
                              {"epochs", hyper.epochs},
                              {"batch_size", hyper.batch_size}};
    return report;
}

json EvalReport::to_json() const {
    json out;
    out["asr"] = asr;
    out["cta"] = cta;
    json ftr_obj = json::object();
    for (const auto& [s, value] : ftr) ftr_obj[to_string(s)] = value;
    out["ftr"] = ftr_obj;
    out["repeats"] = repeats;
    out["config"] = config;
    out["counts"] = {{"asr_hits", counts.asr_hits},
                     {"asr_total", counts.asr_total},
                     {"cta_hits", counts.cta_hits},
                     {"cta_total", counts.cta_total}};
    json ftr_counts = json::object();
    for (const auto& [s, c] : counts.ftr)
        ftr_counts[to_string(s)] = {{"hits", c.hits},
                                    {"eligible", c.eligible},
                                    {"excluded", c.excluded}};
    out["counts"]["ftr"] = ftr_counts;
    return out;
}

std::string EvalReport::to_table() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << "metric            value (%)\n";
    os << "----------------  ---------\n";
    os << std::left << std::setw(18) << "ASR" << std::right << std::setw(9)
       << asr * 100.0 << "\n";
    os << std::left << std::setw(18) << "CTA" << std::right << std::setw(9)
       << cta * 100.0 << "\n";
    for (const auto& [s, value] : ftr)
        os << std::left << std::setw(18) << ("FTR_" + to_string(s))
           << std::right << std::setw(9) << value * 100.0 << "\n";
    return os.str();
}

}  // namespace cbw
