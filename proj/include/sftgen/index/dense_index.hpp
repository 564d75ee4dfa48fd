#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sftgen::index {

inline constexpr std::size_t kEmbeddingDim = 1024;

using Embedding = std::vector<float>;

/// Unit-L2 copy of `v`. Throws ValidationError("degenerate embedding") for a
/// zero or non-finite vector.
Embedding normalized(std::span<const float> v);

/// Cosine similarity in [-1, 1], computed in double. Throws on mismatched
/// dimensions or a zero vector.
double cosine(std::span<const float> a, std::span<const float> b);

/// Exact brute-force inner-product index over unit vectors, stored
/// row-major in one contiguous buffer for the dot_rows kernel.
class DenseIndex {
public:
    explicit DenseIndex(std::size_t dimension = kEmbeddingDim);

    /// Stores the unit-normalized vector. Throws ValidationError on a
    /// dimension mismatch, a degenerate vector, or a duplicate id.
    void add(std::string chunk_id, std::span<const float> vec);

    std::size_t dimension() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& chunk_ids() const { return ids_; }
    std::optional<std::size_t> position(std::string_view chunk_id) const;
    std::span<const float> vector(std::size_t pos) const;
    std::span<const float> matrix() const { return data_; }

    /// Inner product of a unit query with every stored vector, by position.
    std::vector<double> score_all(std::span<const float> unit_query) const;

private:
    std::size_t dim_;
    std::vector<std::string> ids_;
    std::map<std::string, std::size_t, std::less<>> positions_;
    std::vector<float> data_;
};

}  // namespace sftgen::index
