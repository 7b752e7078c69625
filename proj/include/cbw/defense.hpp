#pragma once

// Test-stage defenses: leave-one-out perplexity ranking over tokens (with
// recall of known trigger positions), prediction-consistency scoring of
// images blended with clean overlays, and ROC/AUC over the resulting scores.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cbw/corpus.hpp"
#include "cbw/image.hpp"
#include "cbw/stealth.hpp"
#include "cbw/surrogate.hpp"
#include "cbw/trigger.hpp"

namespace cbw {

struct SuspicionRanking {
    // (token index, perplexity drop), descending by score; ties keep the
    // lower index first
    std::vector<std::pair<int, double>> ranked;
};

// score_i = perplexity(text) - perplexity(text without token i); larger
// means more suspicious. Needs at least two tokens.
SuspicionRanking onion_rank(std::string_view text, const NGramLM& lm);

struct OnionRecall {
    struct PerComponent {
        long long flagged = 0;  // records whose trigger made the top-k
        long long total = 0;    // records carrying a key in this component
        double recall() const {
            return total > 0 ? static_cast<double>(flagged) / total : 0.0;
        }
    };
    std::map<Component, PerComponent> per_component;
    int top_k = 1;

    nlohmann::json to_json() const;
};

// Recall of known trigger positions (recorded in provenance meta by the
// poisoning ops) within the top-k suspicion ranking of their component.
OnionRecall onion_filter_recall(const std::vector<Corpus>& testsets,
                                const NGramLM& lm, int top_k);

// Per-pixel convex blend round(weight*base + (1-weight)*clean), rounding
// half away from zero; clean is nearest-neighbor resized when shapes differ.
Image strip_overlay(const Image& base, const Image& clean, double weight = 0.5);

struct StripScore {
    std::string id;
    double max_agreement = 0.0;  // largest fraction agreeing on one label
    std::optional<bool> backdoored;
};

// Predicts on each overlaid variant (text unchanged) and reports the largest
// fraction of variants sharing a single predicted label.
StripScore strip_score(const SurrogateModel& model, const PromptRecord& record,
                       const std::vector<Image>& overlay_set, double weight,
                       const ImageStore* store);

struct RocCurve {
    std::vector<std::pair<double, double>> points;  // (fpr, tpr), fpr ascending
    double auc = 0.0;
    double tpr_at_fpr10 = 0.0;  // TPR at the largest threshold with FPR <= 0.1

    nlohmann::json to_json() const;
    void write_csv(const std::filesystem::path& path) const;
};

// Threshold sweep over the union of scores; higher score means classified
// backdoored. Ties are averaged (identical distributions give AUC 0.5).
RocCurve roc_auc(const std::vector<double>& clean_scores,
                 const std::vector<double>& backdoored_scores);

}  // namespace cbw
