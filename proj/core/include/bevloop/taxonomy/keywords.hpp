#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "bevloop/scene/types.hpp"

namespace bevloop::taxonomy {

inline constexpr int kEmbedDim = 64;
using Embedding = std::array<double, kEmbedDim>;

double euclidean(const Embedding& a, const Embedding& b);

// Expert-written cause annotation for one failure case (descriptions are
// already cross-voted down to the agreed top few).
struct Annotation {
    std::string scene_id;
    std::vector<std::string> descriptions;
    scene::SceneTags tags;
    scene::ObjectClass collider_cls = scene::ObjectClass::vehicle;
    std::string gt_label;  // expert category, used only by evaluation
};

std::vector<Annotation> load_annotations(const std::string& path);

class KeywordExtractor {
  public:
    virtual ~KeywordExtractor() = default;
    // Keyword surface forms mentioned by one description, in first-mention
    // order, duplicates removed.
    virtual std::vector<std::string> extract(const std::string& text) const = 0;
};

// Deterministic extractor: lowercase tokenization, stoplist, then a fixed
// surface-form lexicon. Morphological variants (rainy, curbs, ...) map to
// themselves so the fuzzy merge downstream has real work to do.
class MockExtractor : public KeywordExtractor {
  public:
    std::vector<std::string> extract(const std::string& text) const override;
    static const std::map<std::string, std::string>& lexicon();
};

// Union over an annotation's descriptions, first-mention order.
std::vector<std::string> extract_keywords(const Annotation& annotation,
                                          const KeywordExtractor& extractor);

// Surface-form embedding: hashed anchored character prefixes on the unit
// sphere. Morphological variants land close; unrelated words are near
// orthogonal. Used for the merge step only.
Embedding form_embedding(const std::string& word);

// Context embedding from keyword co-occurrence: one axis per keyword, then
// a few diffusion passes through the co-occurrence graph. Keywords of one
// failure family end up close, unrelated families near orthogonal. Used
// for K selection / K-means. self_weight is the per-pass self retention.
std::map<std::string, Embedding> context_embeddings(
    const std::vector<std::vector<std::string>>& keyword_sets, double self_weight = 2.0);

}  // namespace bevloop::taxonomy
