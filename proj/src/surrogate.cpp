#include "cbw/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "cbw/error.hpp"
#include "cbw/rng.hpp"
#include "cbw/tokenize.hpp"

namespace cbw {

using nlohmann::json;

std::vector<std::string> label_codebook(const TaskSpec& task,
                                        const AttackTarget& target) {
    (void)target;
    std::vector<std::string> codebook;
    if (task.kind == TaskKind::classification) {
        codebook = task.labels;
    } else {
        codebook = {kCleanLabel, kBackdooredLabel};
    }
    std::set<std::string> seen(codebook.begin(), codebook.end());
    if (seen.size() != codebook.size())
        throw Error("label codebook contains duplicates");
    return codebook;
}

std::string reference_label(const PromptRecord& record, const TaskSpec& task,
                            const AttackTarget* target) {
    if (task.kind == TaskKind::classification) return record.response;
    if (!target)
        throw Error("generation tasks need an attack target to derive the "
                    "clean/backdoored reference label");
    const auto response_tokens = tokenize(record.response);
    const auto target_tokens = tokenize(target->value);
    return ends_with_token_seq(response_tokens, target_tokens)
               ? kBackdooredLabel
               : kCleanLabel;
}

namespace {

Vec forward_hidden_pre(const SurrogateModel& model,
                       const SparseFeature& features) {
    Vec hpre = model.b1;
    for (const auto& [j, v] : features)
        hpre.noalias() += v * model.w1.row(j).transpose();
    return hpre;
}

Vec forward_logits(const SurrogateModel& model, const Vec& hidden) {
    return model.w2.transpose() * hidden + model.b2;
}

int argmax_lowest(const Vec& scores) {
    int best = 0;
    for (int i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;
    return best;
}

}  // namespace

Scalar loss_and_gradients(const SurrogateModel& model,
                          std::span<const TrainExample> batch,
                          Gradients* grads) {
    if (batch.empty()) throw Error("empty batch");
    const int classes = model.classes();

    if (grads) {
        if (grads->w1.rows() != model.w1.rows() ||
            grads->w1.cols() != model.w1.cols()) {
            grads->w1 = MatRow::Zero(model.w1.rows(), model.w1.cols());
            grads->touched.clear();
        }
        for (int j : grads->touched) grads->w1.row(j).setZero();
        grads->touched.clear();
        grads->b1 = Vec::Zero(model.b1.size());
        grads->w2 = Mat::Zero(model.w2.rows(), model.w2.cols());
        grads->b2 = Vec::Zero(model.b2.size());
    }

    const Scalar inv_n = Scalar(1) / static_cast<Scalar>(batch.size());
    Scalar loss = 0;
    for (const auto& ex : batch) {
        if (ex.label < 0 || ex.label >= classes)
            throw Error("training label index out of range");
        const Vec hpre = forward_hidden_pre(model, ex.features);
        const Vec hidden = hpre.cwiseMax(Scalar(0));
        const Vec logits = forward_logits(model, hidden);

        const Scalar max_logit = logits.maxCoeff();
        const Vec shifted = (logits.array() - max_logit).exp();
        const Scalar z = shifted.sum();
        loss += ex.weight * (std::log(z) - (logits[ex.label] - max_logit));

        if (!grads) continue;
        Vec dlogits = shifted / z;
        dlogits[ex.label] -= Scalar(1);
        dlogits *= ex.weight * inv_n;

        grads->w2.noalias() += hidden * dlogits.transpose();
        grads->b2 += dlogits;
        Vec dhidden = model.w2 * dlogits;
        for (int i = 0; i < dhidden.size(); ++i)
            if (hpre[i] <= Scalar(0)) dhidden[i] = 0;
        grads->b1 += dhidden;
        for (const auto& [j, v] : ex.features) {
            grads->w1.row(j).noalias() += v * dhidden.transpose();
            grads->touched.push_back(j);
        }
    }
    if (grads) {
        std::sort(grads->touched.begin(), grads->touched.end());
        grads->touched.erase(
            std::unique(grads->touched.begin(), grads->touched.end()),
            grads->touched.end());
    }
    return loss * inv_n;
}

namespace {

void append_pool(std::vector<TrainExample>& examples, const Corpus& pool,
                 const std::vector<std::string>& codebook,
                 const TaskSpec& task, const AttackTarget* target,
                 const Hyper& hyper, const ImageStore* store) {
    for (const auto& rec : pool.records) {
        TrainExample ex;
        ex.features = featurize_sparse(rec, hyper.buckets, hyper.grid, store);
        const std::string label = reference_label(rec, task, target);
        const auto it = std::find(codebook.begin(), codebook.end(), label);
        if (it == codebook.end())
            throw Error("record " + rec.id + ": label \"" + label +
                        "\" is not covered by the codebook");
        ex.label = static_cast<int>(it - codebook.begin());
        examples.push_back(std::move(ex));
    }
}

}  // namespace

SurrogateModel train(const Corpus& clean, const Corpus& positives,
                     const std::map<NegativeStrategy, Corpus>& negatives,
                     const Hyper& hyper, std::uint64_t seed,
                     const AttackTarget* target, const ImageStore* store) {
    if (clean.records.empty())
        throw Error("training needs a nonempty clean pool");
    if (hyper.hidden < 1 || hyper.batch_size < 1 || hyper.epochs < 0)
        throw ConfigError("invalid surrogate hyperparameters");

    const TaskSpec& task = clean.task;
    AttackTarget dummy;
    const std::vector<std::string> codebook =
        label_codebook(task, target ? *target : dummy);

    SurrogateModel model;
    model.label_codebook = codebook;
    model.hyper = hyper;
    model.hyper.seed = seed;
    const int dim = feature_dim(hyper.buckets);
    const int hidden = hyper.hidden;
    const int classes = static_cast<int>(codebook.size());

    // seeded uniform init in [-a, a], a = sqrt(6 / (fan_in + fan_out))
    Rng init_rng = derive_rng(seed, "surrogate:init");
    const Scalar a1 = std::sqrt(Scalar(6) / (dim + hidden));
    const Scalar a2 = std::sqrt(Scalar(6) / (hidden + classes));
    model.w1 = MatRow(dim, hidden);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < hidden; ++j)
            model.w1(i, j) = static_cast<Scalar>(init_rng.real(-a1, a1));
    model.b1 = Vec::Zero(hidden);
    model.w2 = Mat(hidden, classes);
    for (int i = 0; i < hidden; ++i)
        for (int j = 0; j < classes; ++j)
            model.w2(i, j) = static_cast<Scalar>(init_rng.real(-a2, a2));
    model.b2 = Vec::Zero(classes);

    // three pools; the summed-mean objective is realized by per-example
    // weights N / (P * |pool|) so every nonempty pool contributes equally
    std::vector<TrainExample> examples;
    const std::size_t clean_start = 0;
    append_pool(examples, clean, codebook, task, target, hyper, store);
    const std::size_t pos_start = examples.size();
    append_pool(examples, positives, codebook, task, target, hyper, store);
    const std::size_t neg_start = examples.size();
    for (const auto& [strategy, pool] : negatives) {
        (void)strategy;
        append_pool(examples, pool, codebook, task, target, hyper, store);
    }
    const std::size_t total = examples.size();
    const std::size_t n_clean = pos_start - clean_start;
    const std::size_t n_pos = neg_start - pos_start;
    const std::size_t n_neg = total - neg_start;
    const int pools = (n_clean > 0) + (n_pos > 0) + (n_neg > 0);
    auto pool_weight = [&](std::size_t pool_size) {
        return static_cast<Scalar>(total) /
               (static_cast<Scalar>(pools) * static_cast<Scalar>(pool_size));
    };
    for (std::size_t i = 0; i < total; ++i) {
        if (i < pos_start)
            examples[i].weight = pool_weight(n_clean);
        else if (i < neg_start)
            examples[i].weight = pool_weight(n_pos);
        else
            examples[i].weight = pool_weight(n_neg);
    }

    Rng shuffle_rng = derive_rng(seed, "surrogate:shuffle");
    Gradients grads;
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        shuffle_rng.shuffle(examples);
        const Scalar lr =
            hyper.linear_decay
                ? hyper.learning_rate *
                      (Scalar(1) - static_cast<Scalar>(epoch) / hyper.epochs)
                : hyper.learning_rate;
        Scalar epoch_loss = 0;
        for (std::size_t start = 0; start < total;
             start += static_cast<std::size_t>(hyper.batch_size)) {
            const std::size_t count = std::min(
                static_cast<std::size_t>(hyper.batch_size), total - start);
            const std::span<const TrainExample> batch(examples.data() + start,
                                                      count);
            const Scalar batch_loss = loss_and_gradients(model, batch, &grads);
            epoch_loss += batch_loss * static_cast<Scalar>(count);

            for (int j : grads.touched)
                model.w1.row(j) -= lr * grads.w1.row(j);
            model.b1 -= lr * grads.b1;
            model.w2 -= lr * grads.w2;
            model.b2 -= lr * grads.b2;
        }
        epoch_loss /= static_cast<Scalar>(total);
        if (!std::isfinite(epoch_loss))
            throw Error("training diverged (non-finite loss) at epoch " +
                        std::to_string(epoch));
    }
    return model;
}

int predict_class(const SurrogateModel& model, const SparseFeature& features) {
    const Vec hidden = forward_hidden_pre(model, features).cwiseMax(Scalar(0));
    return argmax_lowest(forward_logits(model, hidden));
}

std::string predict(const SurrogateModel& model, const PromptRecord& record,
                    const ImageStore* store) {
    const SparseFeature features =
        featurize_sparse(record, model.hyper.buckets, model.hyper.grid, store);
    return model.label_codebook[static_cast<std::size_t>(
        predict_class(model, features))];
}

namespace {

constexpr char kMagic[8] = {'C', 'B', 'W', 'M', '0', '0', '0', '1'};

void write_block(std::ofstream& out, const Scalar* data, std::size_t count) {
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(count * sizeof(Scalar)));
}

void read_block(std::ifstream& in, Scalar* data, std::size_t count) {
    in.read(reinterpret_cast<char*>(data),
            static_cast<std::streamsize>(count * sizeof(Scalar)));
    if (!in) throw Error("truncated model checkpoint");
}

}  // namespace

void save_model(const SurrogateModel& model,
                const std::filesystem::path& path) {
    json header;
    header["version"] = 1;
    header["storage"] = "w1_row_major_f64";
    header["dims"] = {{"d", model.dim()},
                      {"h", model.hidden()},
                      {"c", model.classes()}};
    header["codebook"] = model.label_codebook;
    header["hyper"] = {{"hidden", model.hyper.hidden},
                       {"buckets", model.hyper.buckets},
                       {"grid", model.hyper.grid},
                       {"learning_rate", model.hyper.learning_rate},
                       {"linear_decay", model.hyper.linear_decay},
                       {"epochs", model.hyper.epochs},
                       {"batch_size", model.hyper.batch_size},
                       {"seed", model.hyper.seed}};
    const std::string head = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write model checkpoint: " + path.string());
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t len = head.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    write_block(out, model.w1.data(), static_cast<std::size_t>(model.w1.size()));
    write_block(out, model.b1.data(), static_cast<std::size_t>(model.b1.size()));
    write_block(out, model.w2.data(), static_cast<std::size_t>(model.w2.size()));
    write_block(out, model.b2.data(), static_cast<std::size_t>(model.b2.size()));
    if (!out) throw Error("failed writing model checkpoint");
}

SurrogateModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open model checkpoint: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw Error("not a surrogate checkpoint: " + path.string());
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string head(len, '\0');
    in.read(head.data(), static_cast<std::streamsize>(len));
    if (!in) throw Error("truncated model checkpoint header");
    const json header = json::parse(head);
    if (header.at("version").get<int>() != 1)
        throw Error("unsupported checkpoint version");

    SurrogateModel model;
    const int d = header.at("dims").at("d").get<int>();
    const int h = header.at("dims").at("h").get<int>();
    const int c = header.at("dims").at("c").get<int>();
    model.label_codebook =
        header.at("codebook").get<std::vector<std::string>>();
    const auto& hy = header.at("hyper");
    model.hyper.hidden = hy.at("hidden").get<int>();
    model.hyper.buckets = hy.at("buckets").get<int>();
    model.hyper.grid = hy.at("grid").get<int>();
    model.hyper.learning_rate = hy.at("learning_rate").get<Scalar>();
    model.hyper.linear_decay = hy.at("linear_decay").get<bool>();
    model.hyper.epochs = hy.at("epochs").get<int>();
    model.hyper.batch_size = hy.at("batch_size").get<int>();
    model.hyper.seed = hy.at("seed").get<std::uint64_t>();

    model.w1 = MatRow(d, h);
    model.b1 = Vec(h);
    model.w2 = Mat(h, c);
    model.b2 = Vec(c);
    read_block(in, model.w1.data(), static_cast<std::size_t>(model.w1.size()));
    read_block(in, model.b1.data(), static_cast<std::size_t>(model.b1.size()));
    read_block(in, model.w2.data(), static_cast<std::size_t>(model.w2.size()));
    read_block(in, model.b2.data(), static_cast<std::size_t>(model.b2.size()));
    return model;
}

}  // namespace cbw
