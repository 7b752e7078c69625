#include "cbw/trigger.hpp"

#include <algorithm>
#include <map>

#include "cbw/error.hpp"
#include "cbw/tokenize.hpp"

namespace cbw {

std::string to_string(Component c) {
    switch (c) {
        case Component::instruction: return "instruction";
        case Component::input: return "input";
        case Component::image: return "image";
    }
    return "?";
}

std::string to_string(KeyId k) {
    switch (k) {
        case KeyId::instruction_key: return "instruction_key";
        case KeyId::input_key: return "input_key";
        case KeyId::image_key: return "image_key";
    }
    return "?";
}

void AttackTarget::validate(const TaskSpec& task) const {
    if (kind == Kind::label) {
        if (task.kind != TaskKind::classification)
            throw ConfigError("label targets require a classification task");
        if (!task.has_label(value))
            throw ConfigError("target label \"" + value +
                              "\" is not in the task label set");
    } else {
        if (value.empty()) throw ConfigError("target sentence must be nonempty");
    }
}

void CompositeTrigger::validate(const TaskSpec& task) const {
    auto check_key = [](const std::string& key, const char* name) {
        if (tokenize(key).size() != 1)
            throw ConfigError(std::string(name) +
                              " must be a single token, got \"" + key + "\"");
    };
    check_key(instruction_key, "instruction key");
    if (multimodal()) {
        if (!input_key.empty())
            throw ConfigError("multimodal triggers pair the instruction key "
                              "with an image patch, not an input key");
        if (image_patch->fraction < 1)
            throw ConfigError("patch fraction must be >= 1");
    } else {
        check_key(input_key, "input key");
    }
    target.validate(task);
}

PlacementMap PlacementMap::correct_for(const CompositeTrigger& trigger) {
    PlacementMap map;
    map.entries.emplace_back(KeyId::instruction_key, Component::instruction);
    if (trigger.multimodal())
        map.entries.emplace_back(KeyId::image_key, Component::image);
    else
        map.entries.emplace_back(KeyId::input_key, Component::input);
    return map;
}

namespace {

// Insert at gap g of the token vector; shifts previously recorded positions.
void insert_at_gap(std::vector<std::string>& tokens, const std::string& key,
                   std::size_t gap, std::vector<std::size_t>& positions) {
    for (auto& p : positions)
        if (p >= gap) ++p;
    tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(gap), key);
    positions.push_back(gap);
}

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) out.push_back(' ');
        out += std::to_string(v[i]);
    }
    return out;
}

}  // namespace

std::string insert_text_key(std::string_view text, std::string_view key,
                            std::optional<std::size_t> gap, Rng& rng) {
    auto key_tokens = tokenize(key);
    if (key_tokens.size() != 1)
        throw Error("trigger key must be a single token, got \"" +
                    std::string(key) + "\"");
    auto tokens = tokenize(text);
    const std::size_t g =
        gap ? *gap : static_cast<std::size_t>(rng.below(tokens.size() + 1));
    if (g > tokens.size())
        throw Error("gap index " + std::to_string(g) + " out of range");
    tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(g),
                  key_tokens[0]);
    return join_tokens(tokens);
}

Image stamp_image_patch(const Image& image, const PatchSpec& spec) {
    if (image.empty()) throw Error("cannot stamp a zero-dimension image");
    if (spec.fraction < 1) throw Error("patch fraction must be >= 1");
    const int side = std::max(
        1, std::min(image.height, image.width) / spec.fraction);
    const int cx = image.width / 2;
    const int cy = image.height / 2;
    const int x0 = cx - side / 2;
    const int y0 = cy - side / 2;

    Image out = image;
    for (int y = y0; y < y0 + side; ++y) {
        for (int x = x0; x < x0 + side; ++x) {
            std::uint8_t* px = out.at(x, y);
            px[0] = spec.color[0];
            px[1] = spec.color[1];
            px[2] = spec.color[2];
        }
    }
    return out;
}

PromptRecord apply_placement(const PromptRecord& record,
                             const CompositeTrigger& trigger,
                             const PlacementMap& placement, Rng& rng,
                             const ImageStore* store) {
    PromptRecord out = record;

    auto entries = placement.entries;
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) {
                         return static_cast<int>(a.first) <
                                static_cast<int>(b.first);
                     });

    std::map<Component, std::vector<std::string>> tokens = {
        {Component::instruction, tokenize(record.instruction)},
        {Component::input, tokenize(record.input)},
    };
    std::map<Component, std::vector<std::size_t>> positions;
    std::map<Component, std::vector<std::string>> inserted;
    std::string placement_desc;

    for (const auto& [key_id, dest] : entries) {
        if (!placement_desc.empty()) placement_desc.push_back(' ');
        placement_desc += to_string(key_id) + ">" + to_string(dest);

        if (key_id == KeyId::image_key) {
            if (dest != Component::image)
                throw Error("image key can only target the image component");
            if (!trigger.image_patch)
                throw Error("placement routes an image key but the trigger "
                            "has no patch");
            if (record.image.empty())
                throw Error("record " + record.id +
                            " has no image to stamp");
            if (!store)
                throw Error("image placement requires an image store");
            const Image stamped =
                stamp_image_patch(store->get(record.image),
                                  *trigger.image_patch);
            const std::string ref = record.image + "#patched";
            store->put(ref, stamped);
            out.image = ref;
            out.meta[kMetaImageStamped] = "1";
            continue;
        }

        const std::string& key = key_id == KeyId::instruction_key
                                     ? trigger.instruction_key
                                     : trigger.input_key;
        if (tokenize(key).size() != 1)
            throw Error("trigger key must be a single token: \"" + key + "\"");
        if (dest == Component::image)
            throw Error("text keys cannot target the image component");
        auto& toks = tokens[dest];
        const std::size_t gap =
            static_cast<std::size_t>(rng.below(toks.size() + 1));
        insert_at_gap(toks, tokenize(key)[0], gap, positions[dest]);
        inserted[dest].push_back(tokenize(key)[0]);
    }

    // only components that received a key are re-serialized
    if (inserted.count(Component::instruction))
        out.instruction = join_tokens(tokens[Component::instruction]);
    if (inserted.count(Component::input))
        out.input = join_tokens(tokens[Component::input]);
    out.meta[kMetaPlacement] =
        placement_desc.empty() ? "none" : placement_desc;
    if (!inserted[Component::instruction].empty()) {
        out.meta[kMetaKeysInstruction] =
            join_tokens(inserted[Component::instruction]);
        out.meta[kMetaPosInstruction] =
            join_sizes(positions[Component::instruction]);
    }
    if (!inserted[Component::input].empty()) {
        out.meta[kMetaKeysInput] = join_tokens(inserted[Component::input]);
        out.meta[kMetaPosInput] = join_sizes(positions[Component::input]);
    }
    return out;
}

}  // namespace cbw
