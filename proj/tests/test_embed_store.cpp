#include "dscope/dates.hpp"
#include "dscope/embedding.hpp"
#include "dscope/store.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

using namespace dscope;
using testutil::TempDir;

namespace {

EmbeddingVector random_unit(std::size_t dim, SplitMix64& rng) {
    std::vector<float> v(dim);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    return l2_normalize(EmbeddingVector(std::move(v)));
}

double cosine_sim(const EmbeddingVector& a, const EmbeddingVector& b) { return 1.0 - distance(a, b, Metric::cosine); }

}  // namespace

TEST(Normalize, ThreeFourFive) {
    const auto v = l2_normalize(EmbeddingVector{3.0f, 4.0f});
    EXPECT_FLOAT_EQ(v.values[0], 0.6f);
    EXPECT_FLOAT_EQ(v.values[1], 0.8f);
}

TEST(Normalize, IdempotentAndUnitNorm) {
    SplitMix64 rng(3);
    for (int i = 0; i < 20; ++i) {
        const auto v = random_unit(768, rng);
        EXPECT_NEAR(l2_norm(v.span()), 1.0, 1e-6);
        const auto w = l2_normalize(v);
        for (std::size_t k = 0; k < v.dim(); ++k) EXPECT_NEAR(w.values[k], v.values[k], 1e-7);
    }
}

TEST(Normalize, ZeroAndNanRejected) {
    EXPECT_THROW(l2_normalize(EmbeddingVector{0.0f, 0.0f}), DataError);
    EXPECT_THROW(l2_normalize(EmbeddingVector{std::nanf(""), 1.0f}), DataError);
}

TEST(Distance, HandArithmetic) {
    const EmbeddingVector a{1.0f, 2.0f}, b{4.0f, 6.0f};
    EXPECT_DOUBLE_EQ(distance(a, b, Metric::euclidean), 5.0);
    EXPECT_DOUBLE_EQ(distance(a, b, Metric::manhattan), 7.0);
    const EmbeddingVector x{1.0f, 0.0f}, y{0.0f, 1.0f};
    EXPECT_NEAR(distance(x, y, Metric::cosine), 1.0, 1e-12);
    EXPECT_NEAR(distance(x, x, Metric::cosine), 0.0, 1e-7);
}

TEST(Distance, MismatchAndSymmetryAndUnitIdentity) {
    EXPECT_THROW(distance(EmbeddingVector{1.0f}, EmbeddingVector{1.0f, 2.0f}, Metric::euclidean), UsageError);
    SplitMix64 rng(11);
    for (int i = 0; i < 100; ++i) {
        const auto a = random_unit(32, rng), b = random_unit(32, rng);
        EXPECT_EQ(distance(a, b, Metric::euclidean), distance(b, a, Metric::euclidean));
        EXPECT_EQ(distance(a, b, Metric::manhattan), distance(b, a, Metric::manhattan));
        EXPECT_NEAR(distance(a, b, Metric::cosine), distance(b, a, Metric::cosine), 1e-7);
        const double e = distance(a, b, Metric::euclidean);
        EXPECT_NEAR(e * e, 2.0 * distance(a, b, Metric::cosine), 1e-5);
        EXPECT_NEAR(distance(a, a, Metric::euclidean), 0.0, 1e-7);
    }
}

TEST(MockEmbed, DeterministicAndUnitNorm) {
    const auto a = mock_embed("T1: hello world", 768, 5), b = mock_embed("T1: hello world", 768, 5);
    EXPECT_EQ(a, b);
    EXPECT_NEAR(l2_norm(a.span()), 1.0, 1e-6);
    EXPECT_NE(a, mock_embed("T1: hello world", 768, 6));
    EXPECT_THROW(mock_embed("x", 1, 0), UsageError);
}

TEST(MockEmbed, TopicTokensCluster) {
    SplitMix64 rng(1);
    std::vector<EmbeddingVector> t1, t3;
    for (int i = 0; i < 100; ++i) {
        std::string tail;
        for (int w = 0; w < 6; ++w) tail += " w" + std::to_string(rng.bounded(300));
        t1.push_back(mock_embed("T1:" + tail, 768, 42, 0.3));
        t3.push_back(mock_embed("T3:" + tail, 768, 42, 0.3));
    }
    double intra = 0.0, inter = 0.0;
    int n_intra = 0, n_inter = 0;
    for (int i = 0; i < 100; ++i) {
        for (int j = 0; j < 100; ++j) {
            inter += cosine_sim(t1[i], t3[j]);
            ++n_inter;
            if (i < j) {
                intra += cosine_sim(t1[i], t1[j]) + cosine_sim(t3[i], t3[j]);
                n_intra += 2;
            }
        }
    }
    EXPECT_GT(intra / n_intra, inter / n_inter);
}

TEST(Dates, ParseAndFormat) {
    EXPECT_EQ(format_date(parse_date("2020-03-11")), "2020-03-11");
    EXPECT_EQ(format_date(parse_date("2020-03-11T23:30:00Z")), "2020-03-11");
    EXPECT_EQ(format_date(parse_date("2020-03-11T23:30:00-02:00")), "2020-03-12");
    EXPECT_EQ(format_date(parse_date("2020-03-12T01:00:00+05:00")), "2020-03-11");
    EXPECT_THROW(parse_date("2020-02-30"), DataError);
    EXPECT_THROW(parse_date("March 11"), DataError);
}

TEST(Dates, SurveillanceWindowHas71Days) {
    EXPECT_EQ(days_between(parse_date("2020-01-26"), parse_date("2020-04-05")) + 1, 71);
}

TEST(Store, TwoVectorsDimFour) {
    TempDir dir;
    const auto path = dir.file("a.bin");
    const std::vector<EmbeddingVector> v = {EmbeddingVector{1, 2, 3, 4}, EmbeddingVector{-1, 0.5f, 0, 8}};
    write_store(v, path);
    EXPECT_EQ(std::filesystem::file_size(path), kStoreHeaderBytes + 32);
    EXPECT_EQ(read_store(path), v);
    const std::string bytes = testutil::slurp(path);
    EXPECT_EQ(std::memcmp(bytes.data(), "DSCOPE-EMB-V001\0", 16), 0);
    StoreReader r(path);
    EXPECT_EQ(r.dim(), 4u);
    EXPECT_EQ(r.count(), 2u);
    EXPECT_FALSE(r.header().normalized);
    EXPECT_FALSE(std::filesystem::exists(path + ".tmp"));
}

TEST(Store, HeaderLayoutIsLittleEndian) {
    TempDir dir;
    const auto path = dir.file("h.bin");
    std::vector<EmbeddingVector> v(3, EmbeddingVector{0.6f, 0.8f});
    write_store(v, path);
    const std::string b = testutil::slurp(path);
    ASSERT_GE(b.size(), kStoreHeaderBytes);
    const auto u8 = [&](std::size_t i) { return static_cast<unsigned char>(b[i]); };
    EXPECT_EQ(u8(16), 1);  // version
    EXPECT_EQ(u8(20), 2);  // dim
    EXPECT_EQ(u8(24), 3);  // count
    EXPECT_EQ(u8(32), 1);  // normalized flag inferred
    for (std::size_t i = 33; i < 40; ++i) EXPECT_EQ(u8(i), 0);
    float first;
    std::memcpy(&first, b.data() + 40, 4);
    EXPECT_EQ(first, 0.6f);
}

TEST(Store, EmptyStore) {
    TempDir dir;
    const auto path = dir.file("e.bin");
    write_store(std::vector<EmbeddingVector>{}, path);
    StoreReader r(path);
    EXPECT_EQ(r.count(), 0u);
    EXPECT_FALSE(r.next_chunk(10).has_value());
}

TEST(Store, TenThousandRandomUnitVectorsRoundTrip) {
    TempDir dir;
    const auto path = dir.file("big.bin");
    SplitMix64 rng(99);
    std::vector<EmbeddingVector> v;
    for (int i = 0; i < 10000; ++i) v.push_back(random_unit(768, rng));
    write_store(v, path);
    const auto back = read_store(path, 777);
    ASSERT_EQ(back.size(), v.size());
    for (std::size_t i = 0; i < v.size(); ++i) ASSERT_EQ(std::memcmp(back[i].values.data(), v[i].values.data(), 768 * 4), 0) << i;
    EXPECT_TRUE(StoreReader(path).header().normalized);
}

TEST(Store, PropertyRoundTripRandomShapes) {
    TempDir dir;
    SplitMix64 rng(5);
    for (int trial = 0; trial < 25; ++trial) {
        const auto dim = 1 + rng.bounded(40), n = rng.bounded(60);
        std::vector<EmbeddingVector> v;
        for (std::uint64_t i = 0; i < n; ++i) {
            std::vector<float> row(dim);
            for (auto& x : row) x = static_cast<float>(rng.normal() * 100.0);
            v.emplace_back(std::move(row));
        }
        const auto path = dir.file("p" + std::to_string(trial));
        write_store(v, path, {}, std::nullopt, static_cast<std::uint32_t>(dim));
        EXPECT_EQ(read_store(path, 1 + rng.bounded(10)), v);
    }
}

TEST(Store, MixedDimsRejected) {
    TempDir dir;
    const std::vector<EmbeddingVector> v = {EmbeddingVector{1, 2}, EmbeddingVector{1, 2, 3}};
    EXPECT_THROW(write_store(v, dir.file("m.bin")), UsageError);
    EXPECT_FALSE(std::filesystem::exists(dir.file("m.bin")));
    EXPECT_FALSE(std::filesystem::exists(dir.file("m.bin.tmp")));
}

TEST(Store, NormalizedStoreRejectsNonUnitRows) {
    TempDir dir;
    const std::vector<EmbeddingVector> v = {EmbeddingVector{1, 0}, EmbeddingVector{2, 0}};
    EXPECT_THROW(write_store(v, dir.file("n.bin"), {}, true), DataError);
    EXPECT_FALSE(std::filesystem::exists(dir.file("n.bin.tmp")));
}

TEST(Store, ChunkingInvariance) {
    TempDir dir;
    const auto path = dir.file("c.bin");
    SplitMix64 rng(8);
    std::vector<EmbeddingVector> v;
    for (int i = 0; i < 5; ++i) v.push_back(random_unit(3, rng));
    write_store(v, path);
    StoreReader r(path);
    std::vector<std::size_t> sizes;
    std::vector<EmbeddingVector> rows;
    while (auto c = r.next_chunk(2)) {
        sizes.push_back(c->rows);
        for (std::size_t i = 0; i < c->rows; ++i) rows.emplace_back(std::vector<float>(c->row(i).begin(), c->row(i).end()));
    }
    EXPECT_EQ(sizes, (std::vector<std::size_t>{2, 2, 1}));
    EXPECT_EQ(rows, read_store(path));
}

TEST(Store, TruncationNamesByteCounts) {
    TempDir dir;
    const auto path = dir.file("t.bin");
    write_store(std::vector<EmbeddingVector>(4, EmbeddingVector{1, 0, 0, 0}), path);
    std::filesystem::resize_file(path, kStoreHeaderBytes + 60);
    try {
        StoreReader r(path);
        FAIL() << "expected truncation error";
    } catch (const DataError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("truncated"), std::string::npos);
        EXPECT_NE(msg.find("expected 104"), std::string::npos) << msg;
        EXPECT_NE(msg.find("found 100"), std::string::npos) << msg;
    }
}

TEST(Store, BadMagicAndVersion) {
    TempDir dir;
    const auto path = dir.file("b.bin");
    write_store(std::vector<EmbeddingVector>(1, EmbeddingVector{1, 0}), path);
    std::string bytes = testutil::slurp(path);
    bytes[0] = 'X';
    { std::ofstream(path, std::ios::binary) << bytes; }
    EXPECT_THROW(StoreReader{path}, DataError);
    bytes[0] = 'D';
    bytes[16] = 9;
    { std::ofstream(path, std::ios::binary) << bytes; }
    EXPECT_THROW(StoreReader{path}, DataError);
}

TEST(Store, MillionRowsStreamWithBoundedMemory) {
    TempDir dir;
    const auto path = dir.file("m.bin");
    constexpr std::uint32_t dim = 8;
    constexpr std::uint64_t n = 1'000'000;
    {
        StoreWriter w(path, dim, false);
        std::vector<float> row(dim);
        for (std::uint64_t i = 0; i < n; ++i) {
            for (std::uint32_t k = 0; k < dim; ++k) row[k] = static_cast<float>(i % 1000) + static_cast<float>(k);
            w.append(row);
        }
        w.finish();
    }
    constexpr std::size_t chunk = 4096;
    StoreReader r(path);
    std::uint64_t seen = 0;
    double checksum = 0.0;
    while (auto c = r.next_chunk(chunk)) {
        seen += c->rows;
        checksum += c->row(0)[0];
    }
    EXPECT_EQ(seen, n);
    EXPECT_GT(checksum, 0.0);
    EXPECT_LE(r.peak_buffer_bytes(), 2 * chunk * dim * sizeof(float));
}

TEST(Sidecar, RoundTripAndRowValidation) {
    TempDir dir;
    const auto path = dir.file("s.bin");
    const std::vector<EmbeddingVector> v = {EmbeddingVector{1, 0}, EmbeddingVector{0, 1}};
    const std::vector<TweetRecord> meta = {{"a", parse_date("2020-01-26"), 0}, {"b", parse_date("2020-04-05"), 1}};
    write_store(v, path, meta);
    EXPECT_EQ(read_sidecar(sidecar_path(path)), meta);
    const std::vector<TweetRecord> bad = {{"a", parse_date("2020-01-26"), 1}, {"b", parse_date("2020-04-05"), 0}};
    EXPECT_THROW(write_store(v, dir.file("x.bin"), bad), UsageError);
    EXPECT_THROW(parse_tweet_record(R"({"record_id":"x","date":"1800-01-01","row":0})", 1), DataError);
}
