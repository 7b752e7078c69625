#pragma once

// Desk-scale surrogate learner: a one-hidden-layer rectifier network over
// hashed bag features, trained with mini-batch SGD on the three-pool mixture
// (clean and negative records with their true labels, positives with the
// attack target). The per-pool means are summed, so each pool contributes
// equally regardless of size. Training is single-threaded over the update
// sequence and bit-reproducible under a fixed seed.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cbw/corpus.hpp"
#include "cbw/features.hpp"
#include "cbw/poison.hpp"
#include "cbw/trigger.hpp"
#include "cbw/types.hpp"

namespace cbw {

struct Hyper {
    int hidden = 64;     // H
    int buckets = 4096;  // B per component; feature dim = 3B
    int grid = 8;        // image downsample grid
    Scalar learning_rate = 0.1;
    bool linear_decay = false;
    int epochs = 20;
    int batch_size = 64;
    std::uint64_t seed = 0;
};

struct SurrogateModel {
    MatRow w1;  // D x H, row-major for sparse row access
    Vec b1;  // H
    Mat w2;  // H x C
    Vec b2;  // C
    std::vector<std::string> label_codebook;
    Hyper hyper;

    int dim() const { return static_cast<int>(w1.rows()); }
    int hidden() const { return static_cast<int>(w1.cols()); }
    int classes() const { return static_cast<int>(w2.cols()); }
};

// Reserved codebook labels for the generation-task reduction.
inline constexpr const char* kCleanLabel = "clean";
inline constexpr const char* kBackdooredLabel = "backdoored";

// Classification tasks use the task label set; generation tasks reduce to
// {clean, backdoored} where backdoored means the response ends with the
// target sentence.
std::vector<std::string> label_codebook(const TaskSpec& task,
                                        const AttackTarget& target);

// The codebook label a record's response maps to. target may be null for
// classification tasks.
std::string reference_label(const PromptRecord& record, const TaskSpec& task,
                            const AttackTarget* target);

struct TrainExample {
    SparseFeature features;
    int label = 0;
    Scalar weight = 1.0;  // pool-balancing weight
};

struct Gradients {
    MatRow w1;
    Vec b1;
    Mat w2;
    Vec b2;
    std::vector<int> touched;  // w1 rows with nonzero gradient
};

// Mean weighted cross-entropy over the span; fills grads when non-null.
// Touched w1 rows are tracked internally so sparse batches stay cheap.
Scalar loss_and_gradients(const SurrogateModel& model,
                          std::span<const TrainExample> batch,
                          Gradients* grads);

SurrogateModel train(const Corpus& clean, const Corpus& positives,
                     const std::map<NegativeStrategy, Corpus>& negatives,
                     const Hyper& hyper, std::uint64_t seed,
                     const AttackTarget* target = nullptr,
                     const ImageStore* store = nullptr);

// Argmax over class scores, ties broken toward the lowest codebook index.
std::string predict(const SurrogateModel& model, const PromptRecord& record,
                    const ImageStore* store = nullptr);
int predict_class(const SurrogateModel& model, const SparseFeature& features);

// Checkpoint: versioned JSON header + raw little-endian weight blocks.
void save_model(const SurrogateModel& model,
                const std::filesystem::path& path);
SurrogateModel load_model(const std::filesystem::path& path);

}  // namespace cbw
