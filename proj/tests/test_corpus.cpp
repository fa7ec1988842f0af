#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "slr/corpus.hpp"

using namespace slr;

namespace {

SyntheticConfig desk_config() {
    SyntheticConfig cfg;
    cfg.vocab_size = 8;
    cfg.n_train = 12;
    cfg.n_val = 4;
    cfg.n_test = 4;
    cfg.feature_dim = 10;
    cfg.word_dim = 6;
    cfg.exemplars_per_class = 2;
    cfg.seed = 77;
    return cfg;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("config validation rejects bad values") {
    SyntheticConfig cfg = desk_config();
    cfg.vocab_size = 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = desk_config();
    cfg.signs_per_video = {3, 2};  // inverted range
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = desk_config();
    cfg.mouthing_precision = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = desk_config();
    cfg.signs_per_video = {9, 9};  // more signs than vocabulary
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    desk_config().validate();  // baseline is fine
}

TEST_CASE("generation is deterministic for a fixed seed") {
    CorpusBundle a = generate_synthetic(desk_config());
    CorpusBundle b = generate_synthetic(desk_config());
    REQUIRE(a.videos.size() == b.videos.size());
    for (std::size_t i = 0; i < a.videos.size(); ++i) {
        CHECK(a.videos[i].video_id == b.videos[i].video_id);
        REQUIRE(a.videos[i].features.same_shape(b.videos[i].features));
        for (std::size_t j = 0; j < a.videos[i].features.data.size(); ++j)
            CHECK(a.videos[i].features.data[j] == b.videos[i].features.data[j]);
    }
    REQUIRE(a.subtitles.size() == b.subtitles.size());
    for (std::size_t i = 0; i < a.subtitles.size(); ++i)
        CHECK(a.subtitles[i].text == b.subtitles[i].text);

    SyntheticConfig other = desk_config();
    other.seed = 78;
    CorpusBundle c = generate_synthetic(other);
    bool differs = false;
    for (std::size_t j = 0; j < a.videos[0].features.data.size(); ++j)
        if (a.videos[0].features.data[j] != c.videos[0].features.data[j]) differs = true;
    CHECK(differs);
}

TEST_CASE("corpus shape invariants: splits, exemplars, plants, subtitles") {
    SyntheticConfig cfg = desk_config();
    CorpusBundle b = generate_synthetic(cfg);
    CHECK(b.train_ids.size() == cfg.n_train);
    CHECK(b.val_ids.size() == cfg.n_val);
    CHECK(b.test_ids.size() == cfg.n_test);
    CHECK(b.videos.size() == cfg.n_train + cfg.n_val + cfg.n_test);
    CHECK(b.gloss_vocab().size() == cfg.vocab_size);
    REQUIRE(b.exemplars.size() == cfg.vocab_size);
    for (const auto& [cls, seqs] : b.exemplars) {
        CHECK(seqs.size() == cfg.exemplars_per_class);
        for (const auto& s : seqs) {
            CHECK(s.dim() == cfg.feature_dim);
            CHECK(s.frames() >= cfg.frames_per_sign.lo);
            CHECK(s.frames() <= cfg.frames_per_sign.hi);
        }
    }
    for (const auto& v : b.videos) {
        CHECK(v.dim() == cfg.feature_dim);
        const SubtitleRecord& sub = b.subtitle(v.video_id);
        CHECK(sub.t_end <= v.frames());
        CHECK(sub.t_begin < sub.t_end);
        CHECK(!sub.text.empty());
    }
    // every plant lies inside its video and is in the vocabulary
    auto vocab = b.gloss_vocab();
    for (const auto& p : b.plants) {
        const FeatureSequence& v = b.video(p.video_id);
        CHECK(p.end <= v.frames());
        CHECK(p.begin < p.end);
        CHECK(std::find(vocab.begin(), vocab.end(), p.sign_class) != vocab.end());
    }
}

TEST_CASE("every planted sign appears in its subtitle, possibly inflected") {
    CorpusBundle b = generate_synthetic(desk_config());
    for (const auto& p : b.plants) {
        const std::string& text = b.subtitle(p.video_id).text;
        bool base = text.find(p.sign_class) != std::string::npos;
        CHECK(base);  // inflection only appends to the gloss, so find() covers both
    }
}

TEST_CASE("embedding table covers glosses, inflections, fillers, and <unk>") {
    SyntheticConfig cfg = desk_config();
    CorpusBundle b = generate_synthetic(cfg);
    CHECK(b.table.vocab.count("<unk>"));
    for (const auto& g : b.gloss_vocab()) {
        CHECK(b.table.vocab.count(g));
        CHECK(b.table.vocab.count(g + "ing"));
    }
    // every subtitle token resolves without falling back to <unk>
    for (const auto& s : b.subtitles)
        for (const auto& tok : tokenize(s.text))
            CHECK(b.table.lookup(tok) != b.table.unk_index);
}

TEST_CASE("domain gap shifts lexicon exemplars away from continuous features") {
    SyntheticConfig flat = desk_config();
    SyntheticConfig gapped = desk_config();
    gapped.domain_gap_offset = 3.0;
    CorpusBundle a = generate_synthetic(flat);
    CorpusBundle g = generate_synthetic(gapped);
    // same seed, so continuous frames differ exactly by the gap vector
    auto mean_frame = [](const CorpusBundle& b) {
        Tensor2 m(1, b.videos[0].dim());
        std::size_t n = 0;
        for (const auto& v : b.videos) {
            for (std::size_t i = 0; i < v.frames(); ++i)
                for (std::size_t j = 0; j < v.dim(); ++j) m.data[j] += v.features.at(i, j);
            n += v.frames();
        }
        for (double& x : m.data) x /= static_cast<double>(n);
        return m;
    };
    Tensor2 diff = mean_frame(g);
    diff.add_scaled(mean_frame(a), -1.0);
    CHECK(diff.frobenius_norm() == doctest::Approx(3.0).epsilon(1e-6));
    // exemplars (lexicon domain) stay where they were
    for (const auto& [cls, seqs] : a.exemplars)
        for (std::size_t e = 0; e < seqs.size(); ++e)
            for (std::size_t j = 0; j < seqs[e].features.data.size(); ++j)
                CHECK(g.exemplars.at(cls)[e].features.data[j] == seqs[e].features.data[j]);
}

TEST_CASE("perturb_alignment: zero shift is the identity, windows stay in range") {
    CorpusBundle b = generate_synthetic(desk_config());
    auto same = perturb_alignment(b.subtitles, b, 0.0, 0.0, 5);
    REQUIRE(same.size() == b.subtitles.size());
    for (std::size_t i = 0; i < same.size(); ++i) {
        CHECK(same[i].t_begin == b.subtitles[i].t_begin);
        CHECK(same[i].t_end == b.subtitles[i].t_end);
    }
    auto moved = perturb_alignment(b.subtitles, b, 10.0, 4.0, 5);
    bool any_shift = false;
    for (std::size_t i = 0; i < moved.size(); ++i) {
        const FeatureSequence& v = b.video(moved[i].video_id);
        CHECK(moved[i].t_begin < moved[i].t_end);
        CHECK(moved[i].t_end <= v.frames());
        if (moved[i].t_begin != b.subtitles[i].t_begin) any_shift = true;
        // length preserved unless clamped at the boundary
        if (moved[i].t_end < v.frames())
            CHECK(moved[i].t_end - moved[i].t_begin ==
                  b.subtitles[i].t_end - b.subtitles[i].t_begin);
    }
    CHECK(any_shift);
    // deterministic in the seed
    auto again = perturb_alignment(b.subtitles, b, 10.0, 4.0, 5);
    for (std::size_t i = 0; i < moved.size(); ++i)
        CHECK(again[i].t_begin == moved[i].t_begin);
}

TEST_CASE("make_paired crops videos to their subtitle window") {
    CorpusBundle b = generate_synthetic(desk_config());
    PairedCorpus train = make_paired(b, Split::train);
    REQUIRE(train.size() == b.train_ids.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
        const std::string& id = train.videos[i].video_id;
        const SubtitleRecord& sub = b.subtitle(id);
        const FeatureSequence& full = b.video(id);
        CHECK(train.videos[i].frames() == sub.t_end - sub.t_begin);
        // cropped rows equal the original rows at the window offset
        for (std::size_t t = 0; t < train.videos[i].frames(); ++t)
            for (std::size_t j = 0; j < full.dim(); ++j)
                CHECK(train.videos[i].features.at(t, j) == full.features.at(sub.t_begin + t, j));
        CHECK(train.texts[i].tokens == tokenize(sub.text));
    }
    PairedCorpus val = make_paired(b, Split::val);
    CHECK(val.size() == b.val_ids.size());
    CHECK(val.split == Split::val);
}

TEST_CASE("make_spot_corpus pairs full streams with subtitle tokens") {
    CorpusBundle b = generate_synthetic(desk_config());
    SpotCorpus sc = make_spot_corpus(b, Split::train);
    REQUIRE(sc.videos.size() == b.train_ids.size());
    REQUIRE(sc.subtitles.size() == sc.videos.size());
    for (std::size_t i = 0; i < sc.videos.size(); ++i) {
        CHECK(sc.videos[i].frames() == b.video(sc.videos[i].video_id).frames());
        CHECK(sc.subtitles[i].tokens == tokenize(b.subtitle(sc.videos[i].video_id).text));
    }
}

TEST_CASE("feature files round-trip to f32 and reject corruption") {
    CorpusBundle b = generate_synthetic(desk_config());
    std::string path = (std::filesystem::temp_directory_path() / "slr_feats.bin").string();
    std::vector<FeatureSequence> subset(b.videos.begin(), b.videos.begin() + 3);
    save_features(path, subset);
    auto loaded = load_features(path);
    REQUIRE(loaded.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(loaded[i].video_id == subset[i].video_id);
        REQUIRE(loaded[i].features.same_shape(subset[i].features));
        for (std::size_t j = 0; j < subset[i].features.data.size(); ++j)
            CHECK(loaded[i].features.data[j] ==
                  doctest::Approx(subset[i].features.data[j]).epsilon(1e-6));
    }
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 16);
    CHECK_THROWS(load_features(path));
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.write("BADMAGIC", 8);
    }
    CHECK_THROWS(load_features(path));
    std::filesystem::remove(path);
}

TEST_CASE("subtitle files round-trip including multi-word text") {
    std::string path = (std::filesystem::temp_directory_path() / "slr_subs.txt").string();
    std::vector<SubtitleRecord> subs = {{"v0", 3, 40, "the dog runs fast"},
                                        {"v1", 0, 12, "single"}};
    save_subtitles(path, subs);
    auto loaded = load_subtitles(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].video_id == "v0");
    CHECK(loaded[0].t_begin == 3);
    CHECK(loaded[0].t_end == 40);
    CHECK(loaded[0].text == "the dog runs fast");
    CHECK(loaded[1].text == "single");
    std::filesystem::remove(path);
}

TEST_CASE("bundle save/load round-trips and rerunning save is byte-identical") {
    CorpusBundle b = generate_synthetic(desk_config());
    std::string dir = (std::filesystem::temp_directory_path() / "slr_bundle").string();
    std::filesystem::remove_all(dir);
    save_bundle(dir, b);
    CorpusBundle r = load_bundle(dir);
    CHECK(r.videos.size() == b.videos.size());
    CHECK(r.subtitles.size() == b.subtitles.size());
    CHECK(r.train_ids == b.train_ids);
    CHECK(r.val_ids == b.val_ids);
    CHECK(r.test_ids == b.test_ids);
    CHECK(r.mouthing.size() == b.mouthing.size());
    CHECK(r.plants.size() == b.plants.size());
    CHECK(r.exemplars.size() == b.exemplars.size());
    CHECK(r.table.vocab.size() == b.table.vocab.size());
    for (std::size_t i = 0; i < b.videos.size(); ++i)
        for (std::size_t j = 0; j < b.videos[i].features.data.size(); ++j)
            CHECK(r.videos[i].features.data[j] ==
                  doctest::Approx(b.videos[i].features.data[j]).epsilon(1e-6));

    // writing the loaded bundle again produces byte-identical files
    std::string dir2 = dir + "2";
    std::filesystem::remove_all(dir2);
    save_bundle(dir2, r);
    for (const auto& name : {"features.bin", "exemplars.bin", "subtitles.txt",
                             "embeddings.txt", "mouthing.txt", "plants.txt", "splits.txt"})
        CHECK(read_file(dir + "/" + name) == read_file(dir2 + "/" + name));
    std::filesystem::remove_all(dir);
    std::filesystem::remove_all(dir2);
}

TEST_CASE("mouthing candidates reference real videos, words, and frames") {
    SyntheticConfig cfg = desk_config();
    cfg.mouthing_recall = 1.0;
    cfg.mouthing_precision = 1.0;
    CorpusBundle b = generate_synthetic(cfg);
    CHECK(!b.mouthing.empty());
    // perfect precision: every candidate sits inside a matching plant window
    for (const auto& m : b.mouthing) {
        const FeatureSequence& v = b.video(m.video_id);
        CHECK(m.frame_index < v.frames());
        bool inside = false;
        for (const auto& p : b.plants)
            if (p.video_id == m.video_id && p.sign_class == m.word &&
                m.frame_index >= p.begin && m.frame_index < p.end)
                inside = true;
        CHECK(inside);
    }
    // perfect recall: every plant in the train split has a candidate
    std::size_t train_plants = 0, covered = 0;
    for (const auto& p : b.plants) {
        bool in_train = std::find(b.train_ids.begin(), b.train_ids.end(), p.video_id) !=
                        b.train_ids.end();
        if (!in_train) continue;
        ++train_plants;
        for (const auto& m : b.mouthing)
            if (m.video_id == p.video_id && m.word == p.sign_class &&
                m.frame_index >= p.begin && m.frame_index < p.end) {
                ++covered;
                break;
            }
    }
    CHECK(covered == train_plants);
}
