#include "cbw/defense.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cbw/error.hpp"
#include "cbw/tokenize.hpp"

namespace cbw {

using nlohmann::json;

SuspicionRanking onion_rank(std::string_view text, const NGramLM& lm) {
    const auto tokens = tokenize(text);
    if (tokens.size() < 2)
        throw Error("suspicion ranking needs at least 2 tokens");
    const double base = perplexity(lm, join_tokens(tokens));

    SuspicionRanking ranking;
    ranking.ranked.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        auto reduced = tokens;
        reduced.erase(reduced.begin() + static_cast<std::ptrdiff_t>(i));
        const double score = base - perplexity(lm, join_tokens(reduced));
        ranking.ranked.emplace_back(static_cast<int>(i), score);
    }
    std::stable_sort(ranking.ranked.begin(), ranking.ranked.end(),
                     [](const auto& a, const auto& b) {
                         return a.second > b.second;
                     });
    return ranking;
}

namespace {

// Positions of this component's inserted keys, as recorded by the trigger
// machinery; empty when the component was untouched.
std::vector<int> trigger_positions(const PromptRecord& rec, Component c) {
    const char* key = c == Component::instruction ? kMetaPosInstruction
                                                  : kMetaPosInput;
    const auto it = rec.meta.find(key);
    std::vector<int> out;
    if (it == rec.meta.end()) return out;
    std::istringstream is(it->second);
    int value;
    while (is >> value) out.push_back(value);
    return out;
}

}  // namespace

OnionRecall onion_filter_recall(const std::vector<Corpus>& testsets,
                                const NGramLM& lm, int top_k) {
    if (top_k < 0) throw Error("top_k must be nonnegative");
    OnionRecall result;
    result.top_k = top_k;
    bool any_provenance = false;

    for (const auto& corpus : testsets) {
        for (const auto& rec : corpus.records) {
            for (Component c : {Component::instruction, Component::input}) {
                const auto positions = trigger_positions(rec, c);
                if (positions.empty()) continue;
                any_provenance = true;
                const std::string& text =
                    c == Component::instruction ? rec.instruction : rec.input;
                const auto tokens = tokenize(text);
                auto& stats = result.per_component[c];
                stats.total += 1;
                if (top_k == 0 || tokens.size() < 2) continue;
                const SuspicionRanking ranking = onion_rank(text, lm);
                const std::size_t limit = std::min(
                    static_cast<std::size_t>(top_k), ranking.ranked.size());
                bool flagged = false;
                for (std::size_t r = 0; r < limit && !flagged; ++r)
                    for (int p : positions)
                        if (ranking.ranked[r].first == p) {
                            flagged = true;
                            break;
                        }
                if (flagged) stats.flagged += 1;
            }
        }
    }
    if (!any_provenance)
        throw Error("no trigger-position provenance found in the testsets");
    return result;
}

json OnionRecall::to_json() const {
    json out;
    out["top_k"] = top_k;
    json comps = json::object();
    for (const auto& [component, stats] : per_component)
        comps[to_string(component)] = {{"recall", stats.recall()},
                                       {"flagged", stats.flagged},
                                       {"total", stats.total}};
    out["per_component"] = comps;
    return out;
}

Image strip_overlay(const Image& base, const Image& clean, double weight) {
    if (base.empty() || clean.empty())
        throw Error("overlay needs non-empty images");
    if (weight <= 0.0 || weight >= 1.0)
        throw Error("overlay weight must lie in (0,1)");

    Image resized;
    const Image* other = &clean;
    if (clean.width != base.width || clean.height != base.height) {
        resized = Image(base.width, base.height);
        for (int y = 0; y < base.height; ++y) {
            const int sy = static_cast<int>(
                static_cast<std::int64_t>(y) * clean.height / base.height);
            for (int x = 0; x < base.width; ++x) {
                const int sx = static_cast<int>(
                    static_cast<std::int64_t>(x) * clean.width / base.width);
                const std::uint8_t* src = clean.at(sx, sy);
                std::uint8_t* dst = resized.at(x, y);
                dst[0] = src[0];
                dst[1] = src[1];
                dst[2] = src[2];
            }
        }
        other = &resized;
    }

    Image out(base.width, base.height);
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        const double blended = weight * base.pixels[i] +
                               (1.0 - weight) * other->pixels[i];
        out.pixels[i] = static_cast<std::uint8_t>(std::lround(blended));
    }
    return out;
}

StripScore strip_score(const SurrogateModel& model, const PromptRecord& record,
                       const std::vector<Image>& overlay_set, double weight,
                       const ImageStore* store) {
    if (!record.multimodal())
        throw Error("record " + record.id + " has no image to overlay");
    if (overlay_set.empty()) throw Error("overlay set is empty");
    if (!store) throw Error("overlay scoring requires an image store");

    const Image& base = store->get(record.image);
    std::map<int, int> votes;
    for (const Image& clean : overlay_set) {
        const Image blended = strip_overlay(base, clean, weight);
        const SparseFeature features = featurize_sparse_with_image(
            record, &blended, model.hyper.buckets, model.hyper.grid);
        votes[predict_class(model, features)] += 1;
    }
    int best = 0;
    for (const auto& [label, count] : votes) best = std::max(best, count);

    StripScore score;
    score.id = record.id;
    score.max_agreement =
        static_cast<double>(best) / static_cast<double>(overlay_set.size());
    return score;
}

RocCurve roc_auc(const std::vector<double>& clean_scores,
                 const std::vector<double>& backdoored_scores) {
    if (clean_scores.empty() || backdoored_scores.empty())
        throw Error("ROC needs both clean and backdoored scores");

    // sweep thresholds downward over the union of observed scores; samples
    // tied at a threshold enter together, which averages ties
    std::vector<std::pair<double, bool>> samples;
    samples.reserve(clean_scores.size() + backdoored_scores.size());
    for (double s : clean_scores) samples.emplace_back(s, false);
    for (double s : backdoored_scores) samples.emplace_back(s, true);
    std::sort(samples.begin(), samples.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    const double n_pos = static_cast<double>(backdoored_scores.size());
    const double n_neg = static_cast<double>(clean_scores.size());

    RocCurve curve;
    curve.points.emplace_back(0.0, 0.0);
    double tp = 0, fp = 0, area2 = 0;  // twice the area, accumulated exactly
    std::size_t i = 0;
    while (i < samples.size()) {
        std::size_t j = i;
        double d_tp = 0, d_fp = 0;
        while (j < samples.size() && samples[j].first == samples[i].first) {
            (samples[j].second ? d_tp : d_fp) += 1;
            ++j;
        }
        area2 += d_fp * (2 * tp + d_tp);
        tp += d_tp;
        fp += d_fp;
        curve.points.emplace_back(fp / n_neg, tp / n_pos);
        i = j;
    }
    curve.auc = area2 / (2.0 * n_pos * n_neg);

    // largest threshold (earliest sweep point) still within FPR <= 0.1
    for (const auto& [fpr, tpr] : curve.points) {
        if (fpr <= 0.1)
            curve.tpr_at_fpr10 = tpr;
        else
            break;
    }
    return curve;
}

json RocCurve::to_json() const {
    json out;
    out["auc"] = auc;
    out["tpr_at_fpr_0.1"] = tpr_at_fpr10;
    json points_json = json::array();
    for (const auto& [fpr, tpr] : points)
        points_json.push_back({{"fpr", fpr}, {"tpr", tpr}});
    out["points"] = points_json;
    return out;
}

void RocCurve::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write ROC csv: " + path.string());
    out << "fpr,tpr\n";
    for (const auto& [fpr, tpr] : points) out << fpr << "," << tpr << "\n";
}

}  // namespace cbw
