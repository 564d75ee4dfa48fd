#include "sftgen/index/dense_index.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "sftgen/common/error.hpp"
#include "sftgen/kernels/dot.hpp"

namespace sftgen::index {

Embedding normalized(std::span<const float> v) {
    const double sq = kernels::squared_norm(v);
    if (!(sq > 0.0) || !std::isfinite(sq)) throw ValidationError("degenerate embedding");
    const double norm = std::sqrt(sq);
    Embedding out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(static_cast<double>(v[i]) / norm);
    return out;
}

double cosine(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw ValidationError(fmt::format("cosine: dimension mismatch ({} vs {})", a.size(), b.size()));
    }
    const double na = kernels::squared_norm(a);
    const double nb = kernels::squared_norm(b);
    if (!(na > 0.0) || !(nb > 0.0)) throw ValidationError("degenerate embedding");
    const double c = kernels::dot(a, b) / std::sqrt(na * nb);
    return std::clamp(c, -1.0, 1.0);
}

DenseIndex::DenseIndex(std::size_t dimension) : dim_(dimension) {
    if (dim_ == 0) throw ValidationError("dense index: dimension must be positive");
}

void DenseIndex::add(std::string chunk_id, std::span<const float> vec) {
    if (vec.size() != dim_) {
        throw ValidationError(fmt::format("dense index: {} has dimension {}, expected {}", chunk_id, vec.size(), dim_));
    }
    if (positions_.count(chunk_id)) throw ValidationError("dense index: duplicate chunk id " + chunk_id);
    const auto unit = normalized(vec);
    positions_.emplace(chunk_id, ids_.size());
    ids_.push_back(std::move(chunk_id));
    data_.insert(data_.end(), unit.begin(), unit.end());
}

std::optional<std::size_t> DenseIndex::position(std::string_view chunk_id) const {
    auto it = positions_.find(chunk_id);
    if (it == positions_.end()) return std::nullopt;
    return it->second;
}

std::span<const float> DenseIndex::vector(std::size_t pos) const {
    return std::span<const float>(data_).subspan(pos * dim_, dim_);
}

std::vector<double> DenseIndex::score_all(std::span<const float> unit_query) const {
    std::vector<double> out(ids_.size());
    kernels::dot_rows(unit_query, data_, dim_, out);
    return out;
}

}  // namespace sftgen::index
