#pragma once

#include "dscope/common.hpp"
#include "dscope/dates.hpp"
#include "dscope/embedding.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dscope {

// Embedding store layout (all integers little-endian):
//   [0,16)   magic "DSCOPE-EMB-V001\0"
//   [16,20)  u32 format version
//   [20,24)  u32 dim
//   [24,32)  u64 row count
//   [32]     u8 normalized flag
//   [33,40)  zero padding
//   [40,...) count * dim IEEE-754 binary32, row-major
inline constexpr std::array<char, 16> kStoreMagic = {'D', 'S', 'C', 'O', 'P', 'E', '-', 'E',
                                                     'M', 'B', '-', 'V', '0', '0', '1', '\0'};
inline constexpr std::uint32_t kStoreVersion = 1;
inline constexpr std::size_t kStoreHeaderBytes = 40;

struct StoreHeader {
    std::uint32_t version = kStoreVersion;
    std::uint32_t dim = 0;
    std::uint64_t count = 0;
    bool normalized = false;

    std::uint64_t payload_bytes() const { return count * dim * sizeof(float); }
};

/// Per-row metadata kept in the JSONL sidecar next to a store.
struct TweetRecord {
    std::string record_id;
    Date date;
    std::uint64_t row = 0;

    bool operator==(const TweetRecord&) const = default;
};

inline std::string sidecar_path(const std::string& store_path) { return store_path + ".meta.jsonl"; }

namespace detail {

template <class T>
void put_le(unsigned char* out, T v) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out[i] = static_cast<unsigned char>(u & 0xFF);
        u = static_cast<U>(u >> 8);
    }
}

template <class T>
T get_le(const unsigned char* in) {
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = sizeof(T); i-- > 0;) u = static_cast<U>((u << 8) | in[i]);
    return static_cast<T>(u);
}

inline std::array<unsigned char, kStoreHeaderBytes> encode_header(const StoreHeader& h) {
    std::array<unsigned char, kStoreHeaderBytes> buf{};
    std::memcpy(buf.data(), kStoreMagic.data(), kStoreMagic.size());
    put_le<std::uint32_t>(buf.data() + 16, h.version);
    put_le<std::uint32_t>(buf.data() + 20, h.dim);
    put_le<std::uint64_t>(buf.data() + 24, h.count);
    buf[32] = h.normalized ? 1 : 0;
    return buf;
}

inline void encode_floats(std::span<const float> in, std::vector<unsigned char>& out) {
    out.resize(in.size() * 4);
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(out.data(), in.data(), out.size());
    } else {
        for (std::size_t i = 0; i < in.size(); ++i) put_le<std::uint32_t>(out.data() + 4 * i, std::bit_cast<std::uint32_t>(in[i]));
    }
}

inline void decode_floats(const unsigned char* in, std::span<float> out) {
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(out.data(), in, out.size() * 4);
    } else {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::bit_cast<float>(get_le<std::uint32_t>(in + 4 * i));
    }
}

}  // namespace detail

/// Streaming writer. Rows go to "<path>.tmp", which is renamed over `path` by finish().
/// If finish() is never reached the temporary file is removed.
class StoreWriter {
public:
    StoreWriter(std::string path, std::uint32_t dim, bool normalized)
        : path_(std::move(path)), tmp_(path_ + ".tmp"), header_{kStoreVersion, dim, 0, normalized} {
        if (dim == 0) throw UsageError("store dim must be positive");
        out_.open(tmp_, std::ios::binary | std::ios::trunc);
        if (!out_) throw DataError("cannot open '" + tmp_ + "' for writing");
        const auto h = detail::encode_header(header_);
        out_.write(reinterpret_cast<const char*>(h.data()), static_cast<std::streamsize>(h.size()));
        check_stream();
    }

    StoreWriter(const StoreWriter&) = delete;
    StoreWriter& operator=(const StoreWriter&) = delete;

    ~StoreWriter() {
        if (!finished_) {
            out_.close();
            std::error_code ec;
            std::filesystem::remove(tmp_, ec);
        }
    }

    void append(std::span<const float> row) {
        if (row.size() != header_.dim) {
            throw UsageError("row " + std::to_string(header_.count) + " has dim " + std::to_string(row.size()) +
                             ", store dim is " + std::to_string(header_.dim));
        }
        if (!all_finite(row)) throw DataError("row " + std::to_string(header_.count) + " has NaN/Inf components");
        if (header_.normalized && !is_unit_norm(row)) {
            throw DataError("row " + std::to_string(header_.count) + " is not unit norm in a normalized store");
        }
        detail::encode_floats(row, bytes_);
        out_.write(reinterpret_cast<const char*>(bytes_.data()), static_cast<std::streamsize>(bytes_.size()));
        check_stream();
        ++header_.count;
    }

    void append(const EmbeddingVector& v) { append(v.span()); }

    std::uint64_t count() const { return header_.count; }

    void finish() {
        const auto h = detail::encode_header(header_);
        out_.seekp(0);
        out_.write(reinterpret_cast<const char*>(h.data()), static_cast<std::streamsize>(h.size()));
        out_.flush();
        check_stream();
        out_.close();
        std::error_code ec;
        std::filesystem::rename(tmp_, path_, ec);
        if (ec) {
            std::filesystem::remove(tmp_, ec);
            throw DataError("cannot move store into place at '" + path_ + "'");
        }
        finished_ = true;
    }

private:
    void check_stream() {
        if (!out_) throw DataError("write failure on '" + tmp_ + "'");
    }

    std::string path_;
    std::string tmp_;
    StoreHeader header_;
    std::ofstream out_;
    std::vector<unsigned char> bytes_;
    bool finished_ = false;
};

inline void write_sidecar(const std::string& path, std::span<const TweetRecord> records) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open '" + tmp + "' for writing");
        for (const auto& r : records) {
            nlohmann::ordered_json j;
            j["record_id"] = r.record_id;
            j["date"] = format_date(r.date);
            j["row"] = r.row;
            out << j.dump() << '\n';
        }
        if (!out) {
            out.close();
            std::filesystem::remove(tmp);
            throw DataError("write failure on '" + tmp + "'");
        }
    }
    std::filesystem::rename(tmp, path);
}

/// Writes `vectors` (and optionally their metadata sidecar) to `path`. When
/// `normalized` is unset it is inferred: true iff the store is non-empty and every row
/// is unit norm.
inline void write_store(std::span<const EmbeddingVector> vectors, const std::string& path,
                        std::span<const TweetRecord> meta = {}, std::optional<bool> normalized = std::nullopt,
                        std::optional<std::uint32_t> dim = std::nullopt) {
    std::uint32_t d = dim.value_or(vectors.empty() ? 1u : static_cast<std::uint32_t>(vectors.front().dim()));
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        if (vectors[i].dim() != d) {
            throw UsageError("mixed dims: row " + std::to_string(i) + " has dim " + std::to_string(vectors[i].dim()) +
                             ", expected " + std::to_string(d));
        }
    }
    if (!meta.empty() && meta.size() != vectors.size()) {
        throw UsageError("metadata length " + std::to_string(meta.size()) + " != vector count " +
                         std::to_string(vectors.size()));
    }
    for (std::size_t i = 0; i < meta.size(); ++i) {
        if (meta[i].row != i) throw UsageError("metadata row " + std::to_string(i) + " has row index " + std::to_string(meta[i].row));
        if (!date_in_supported_range(meta[i].date)) throw DataError("metadata row " + std::to_string(i) + " date out of range");
    }
    bool norm = normalized.value_or(!vectors.empty() && std::all_of(vectors.begin(), vectors.end(), [](const auto& v) {
        return is_unit_norm(v.span());
    }));
    StoreWriter w(path, d, norm);
    for (const auto& v : vectors) w.append(v);
    w.finish();
    if (!meta.empty()) write_sidecar(sidecar_path(path), meta);
}

/// A contiguous block of rows borrowed from a StoreReader; valid until the next read.
struct StoreChunk {
    std::uint64_t first_row = 0;
    std::size_t rows = 0;
    std::size_t dim = 0;
    std::span<const float> data;

    std::span<const float> row(std::size_t i) const { return data.subspan(i * dim, dim); }
    Eigen::Map<const MatrixF> matrix() const {
        return Eigen::Map<const MatrixF>(data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
    }
};

/// Sequential chunked reader. Memory use is bounded by one chunk of payload plus a
/// same-sized decode buffer; peak_buffer_bytes() reports the high-water mark.
class StoreReader {
public:
    explicit StoreReader(const std::string& path) : path_(path) {
        in_.open(path, std::ios::binary);
        if (!in_) throw DataError("cannot open store '" + path + "'");
        std::array<unsigned char, kStoreHeaderBytes> buf{};
        in_.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (in_.gcount() != static_cast<std::streamsize>(buf.size())) {
            throw DataError("store '" + path + "' is shorter than its " + std::to_string(kStoreHeaderBytes) +
                            "-byte header");
        }
        if (std::memcmp(buf.data(), kStoreMagic.data(), kStoreMagic.size()) != 0) {
            throw DataError("store '" + path + "' has bad magic");
        }
        header_.version = detail::get_le<std::uint32_t>(buf.data() + 16);
        if (header_.version != kStoreVersion) {
            throw DataError("store '" + path + "' has unsupported version " + std::to_string(header_.version));
        }
        header_.dim = detail::get_le<std::uint32_t>(buf.data() + 20);
        header_.count = detail::get_le<std::uint64_t>(buf.data() + 24);
        header_.normalized = buf[32] != 0;
        if (header_.dim == 0) throw DataError("store '" + path + "' declares dim 0");
        const auto actual = std::filesystem::file_size(path);
        const auto expected = kStoreHeaderBytes + header_.payload_bytes();
        if (actual < expected) {
            throw DataError("store '" + path + "' is truncated: expected " + std::to_string(expected) +
                            " bytes, found " + std::to_string(actual));
        }
        if (actual > expected) {
            throw DataError("store '" + path + "' has trailing data: expected " + std::to_string(expected) +
                            " bytes, found " + std::to_string(actual));
        }
    }

    const StoreHeader& header() const { return header_; }
    std::size_t dim() const { return header_.dim; }
    std::uint64_t count() const { return header_.count; }
    std::uint64_t position() const { return next_row_; }

    /// Next block of at most `max_rows` rows, or nullopt at end of store.
    std::optional<StoreChunk> next_chunk(std::size_t max_rows) {
        if (max_rows == 0) throw UsageError("chunk size must be positive");
        if (next_row_ >= header_.count) return std::nullopt;
        const std::size_t rows = static_cast<std::size_t>(std::min<std::uint64_t>(max_rows, header_.count - next_row_));
        const std::size_t n = rows * header_.dim;
        raw_.resize(n * 4);
        values_.resize(n);
        peak_ = std::max(peak_, raw_.capacity() + values_.capacity() * sizeof(float));
        in_.read(reinterpret_cast<char*>(raw_.data()), static_cast<std::streamsize>(raw_.size()));
        if (in_.gcount() != static_cast<std::streamsize>(raw_.size())) {
            throw DataError("store '" + path_ + "' ended early at row " + std::to_string(next_row_));
        }
        detail::decode_floats(raw_.data(), values_);
        StoreChunk chunk{next_row_, rows, header_.dim, values_};
        next_row_ += rows;
        return chunk;
    }

    void rewind() {
        in_.clear();
        in_.seekg(static_cast<std::streamoff>(kStoreHeaderBytes));
        next_row_ = 0;
    }

    MatrixF read_all() {
        rewind();
        MatrixF m(static_cast<Eigen::Index>(header_.count), static_cast<Eigen::Index>(header_.dim));
        while (auto c = next_chunk(4096)) {
            m.middleRows(static_cast<Eigen::Index>(c->first_row), static_cast<Eigen::Index>(c->rows)) = c->matrix();
        }
        return m;
    }

    std::size_t peak_buffer_bytes() const { return peak_; }

private:
    std::string path_;
    std::ifstream in_;
    StoreHeader header_;
    std::uint64_t next_row_ = 0;
    std::vector<unsigned char> raw_;
    std::vector<float> values_;
    std::size_t peak_ = 0;
};

/// Visits every row in order as (row index, vector view), reading `chunk_size` rows at a time.
template <class Fn>
void for_each_row(const std::string& path, Fn&& fn, std::size_t chunk_size = 4096) {
    StoreReader reader(path);
    while (auto c = reader.next_chunk(chunk_size)) {
        for (std::size_t i = 0; i < c->rows; ++i) fn(c->first_row + i, c->row(i));
    }
}

inline std::vector<EmbeddingVector> read_store(const std::string& path, std::size_t chunk_size = 4096) {
    std::vector<EmbeddingVector> out;
    for_each_row(path, [&](std::uint64_t, std::span<const float> row) {
        out.emplace_back(std::vector<float>(row.begin(), row.end()));
    }, chunk_size);
    return out;
}

inline Matrix read_store_matrix(const std::string& path) {
    StoreReader reader(path);
    return reader.read_all().cast<double>();
}

inline TweetRecord parse_tweet_record(const std::string& line, std::size_t lineno) {
    const auto where = "sidecar line " + std::to_string(lineno) + ": ";
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(where + "malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object() || !j.contains("record_id") || !j.contains("date") || !j.contains("row")) {
        throw DataError(where + "expected {record_id, date, row}");
    }
    TweetRecord r;
    r.record_id = j["record_id"].is_string() ? j["record_id"].get<std::string>() : j["record_id"].dump();
    r.date = parse_date(j["date"].get<std::string>());
    if (!date_in_supported_range(r.date)) throw DataError(where + "date outside [1900-01-01, 2100-01-01]");
    if (!j["row"].is_number_unsigned()) throw DataError(where + "row must be a non-negative integer");
    r.row = j["row"].get<std::uint64_t>();
    return r;
}

/// Streams sidecar records one at a time.
class SidecarReader {
public:
    explicit SidecarReader(const std::string& path) : path_(path), in_(path) {
        if (!in_) throw DataError("cannot open metadata sidecar '" + path + "'");
    }

    std::optional<TweetRecord> next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++lineno_;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            return parse_tweet_record(line, lineno_);
        }
        return std::nullopt;
    }

private:
    std::string path_;
    std::ifstream in_;
    std::size_t lineno_ = 0;
};

inline std::vector<TweetRecord> read_sidecar(const std::string& path) {
    SidecarReader r(path);
    std::vector<TweetRecord> out;
    while (auto rec = r.next()) out.push_back(std::move(*rec));
    return out;
}

}  // namespace dscope
