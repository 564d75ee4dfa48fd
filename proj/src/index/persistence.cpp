#include "sftgen/index/persistence.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "sftgen/common/error.hpp"

namespace sftgen::index {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'S', 'F', 'T', 'V', 'E', 'C', '0', '1'};

template <typename T>
void put_le(std::string& out, T value) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) out += static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff);
}

void put_f32(std::string& out, float f) { put_le(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
public:
    explicit Reader(std::string data) : data_(std::move(data)) {}

    template <typename T>
    T get_le() {
        need(sizeof(T));
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += sizeof(T);
        return static_cast<T>(v);
    }
    float get_f32() { return std::bit_cast<float>(get_le<std::uint32_t>()); }
    std::string get_bytes(std::size_t n) {
        need(n);
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) throw ValidationError("vectors.bin: truncated file");
    }
    std::string data_;
    std::size_t pos_ = 0;
};

}  // namespace

void save_indexes(const fs::path& dir, const SparseIndex& sparse, const DenseIndex& dense, const json& extra_meta) {
    fs::create_directories(dir);

    std::vector<json> rows;
    rows.reserve(sparse.vocab_size());
    for (const auto& [token, list] : sparse.postings()) {
        json postings = json::array();
        for (const auto& p : list) postings.push_back(json::array({sparse.chunk_ids()[p.doc], p.tf}));
        rows.push_back(json{{"token", token}, {"postings", std::move(postings)}});
    }
    write_jsonl(dir / "postings.jsonl", rows);

    std::string bin(kMagic, sizeof(kMagic));
    put_le<std::uint32_t>(bin, static_cast<std::uint32_t>(dense.dimension()));
    put_le<std::uint64_t>(bin, dense.size());
    for (std::size_t i = 0; i < dense.size(); ++i) {
        const auto& id = dense.chunk_ids()[i];
        put_le<std::uint32_t>(bin, static_cast<std::uint32_t>(id.size()));
        bin += id;
        for (float f : dense.vector(i)) put_f32(bin, f);
    }
    write_text(dir / "vectors.bin", bin);

    json meta = extra_meta.is_object() ? extra_meta : json::object();
    meta["k1"] = sparse.k1();
    meta["b"] = sparse.b();
    meta["dimension"] = dense.dimension();
    meta["chunk_count"] = sparse.size();
    meta["avg_doc_length"] = sparse.avg_doc_length();
    meta["vocab_size"] = sparse.vocab_size();
    json lengths = json::array();
    for (std::size_t i = 0; i < sparse.size(); ++i) lengths.push_back(json::array({sparse.chunk_ids()[i], sparse.doc_length(i)}));
    meta["doc_lengths"] = std::move(lengths);
    write_json(dir / "meta.json", meta);
}

LoadedIndexes load_indexes(const fs::path& dir) {
    auto meta = read_json(dir / "meta.json");

    std::vector<std::string> ids;
    std::vector<std::uint32_t> lengths;
    std::map<std::string, std::uint32_t> pos_of;
    for (const auto& entry : meta.at("doc_lengths")) {
        pos_of.emplace(entry.at(0).get<std::string>(), static_cast<std::uint32_t>(ids.size()));
        ids.push_back(entry.at(0).get<std::string>());
        lengths.push_back(entry.at(1).get<std::uint32_t>());
    }
    PostingMap postings;
    for (const auto& row : read_jsonl(dir / "postings.jsonl")) {
        std::vector<Posting> list;
        for (const auto& p : row.at("postings")) {
            const auto it = pos_of.find(p.at(0).get<std::string>());
            if (it == pos_of.end()) throw ValidationError("postings.jsonl: unknown chunk " + p.at(0).get<std::string>());
            list.push_back({it->second, p.at(1).get<std::uint32_t>()});
        }
        postings.emplace(row.at("token").get<std::string>(), std::move(list));
    }
    auto sparse = SparseIndex::from_parts(std::move(ids), std::move(lengths), std::move(postings),
                                          meta.at("k1").get<double>(), meta.at("b").get<double>());

    Reader r(read_text(dir / "vectors.bin"));
    if (r.get_bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
        throw ValidationError("vectors.bin: bad magic");
    }
    const auto dim = r.get_le<std::uint32_t>();
    const auto count = r.get_le<std::uint64_t>();
    if (dim != meta.at("dimension").get<std::uint32_t>() || count != sparse.size()) {
        throw ValidationError("vectors.bin: header disagrees with meta.json");
    }
    DenseIndex dense(dim);
    std::vector<float> buf(dim);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto id = r.get_bytes(r.get_le<std::uint32_t>());
        for (auto& f : buf) f = r.get_f32();
        dense.add(id, buf);
    }
    if (!r.done()) throw ValidationError("vectors.bin: trailing bytes");
    return {std::move(sparse), std::move(dense), std::move(meta)};
}

}  // namespace sftgen::index
