#include "citeverify/fusion.hpp"

#include <algorithm>
#include <unordered_map>

namespace citeverify {

std::vector<Candidate> merge(std::span<const ScoredPassage> sparse_top,
                             std::span<const ScoredPassage> dense_top, const PassageStore& store) {
    std::vector<Candidate> out;
    out.reserve(sparse_top.size() + dense_top.size());
    std::unordered_map<PassageId, std::size_t> position;

    auto slot = [&](PassageId id) -> Candidate& {
        auto [it, inserted] = position.emplace(id, out.size());
        if (inserted) out.push_back(Candidate{id, store.at(id).doc_url, {}, {}, {}, {}});
        return out[it->second];
    };

    const std::size_t n = std::max(sparse_top.size(), dense_top.size());
    for (std::size_t r = 0; r < n; ++r) {
        if (r < sparse_top.size()) {
            auto& c = slot(sparse_top[r].passage_id);
            if (!c.sparse_rank) {
                c.sparse_rank = r + 1;
                c.sparse_score = sparse_top[r].score;
            }
        }
        if (r < dense_top.size()) {
            auto& c = slot(dense_top[r].passage_id);
            if (!c.dense_rank) {
                c.dense_rank = r + 1;
                c.dense_score = dense_top[r].score;
            }
        }
    }
    return out;
}

}  // namespace citeverify
