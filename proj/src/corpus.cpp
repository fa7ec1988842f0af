#include "slr/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "slr/blobfile.hpp"

namespace slr {

namespace {
constexpr const char* kFeatMagic = "SLRFEAT1";

std::string gloss_name(std::size_t c) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "w%02zu", c);
    return buf;
}

std::string filler_name(std::size_t c) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "f%02zu", c);
    return buf;
}

Tensor2 unit_vector(std::size_t dim, Rng& rng) {
    Tensor2 v(1, dim);
    for (double& x : v.data) x = rng.normal(0, 1);
    return l2_normalize(v);
}

// Householder reflection about a random hyperplane, used for the optional
// per-class rotation variant of the domain gap.
struct Householder {
    Tensor2 u;  // unit row
    void apply(double* row, std::size_t dim) const {
        double s = 0;
        for (std::size_t j = 0; j < dim; ++j) s += row[j] * u.data[j];
        for (std::size_t j = 0; j < dim; ++j) row[j] -= 2.0 * s * u.data[j];
    }
};

}  // namespace

void SyntheticConfig::validate() const {
    auto check_range = [](const CountRange& r, const char* name) {
        if (r.lo < 1 || r.hi < r.lo)
            throw std::invalid_argument(std::string("synthetic config: bad range for ") + name);
    };
    if (vocab_size < 2) throw std::invalid_argument("synthetic config: vocab_size must be >= 2");
    if (n_train < 1 || n_val < 1 || n_test < 1)
        throw std::invalid_argument("synthetic config: all split sizes must be >= 1");
    check_range(signs_per_video, "signs_per_video");
    check_range(frames_per_sign, "frames_per_sign");
    check_range(filler_frames, "filler_frames");
    if (feature_dim < 1 || word_dim < 1)
        throw std::invalid_argument("synthetic config: dims must be >= 1");
    if (noise_sigma < 0 || domain_gap_offset < 0)
        throw std::invalid_argument("synthetic config: sigma and gap must be >= 0");
    if (mouthing_recall < 0 || mouthing_recall > 1 || mouthing_precision < 0 ||
        mouthing_precision > 1)
        throw std::invalid_argument("synthetic config: recall/precision outside [0,1]");
    if (signs_per_video.hi > vocab_size)
        throw std::invalid_argument("synthetic config: signs_per_video exceeds vocabulary");
    if (exemplars_per_class < 1)
        throw std::invalid_argument("synthetic config: exemplars_per_class must be >= 1");
}

const std::vector<std::string>& CorpusBundle::ids(Split s) const {
    switch (s) {
        case Split::train: return train_ids;
        case Split::val: return val_ids;
        default: return test_ids;
    }
}

const FeatureSequence& CorpusBundle::video(const std::string& id) const {
    for (const auto& v : videos)
        if (v.video_id == id) return v;
    throw std::invalid_argument("corpus: unknown video id `" + id + "`");
}

const SubtitleRecord& CorpusBundle::subtitle(const std::string& id) const {
    for (const auto& s : subtitles)
        if (s.video_id == id) return s;
    throw std::invalid_argument("corpus: no subtitle for video `" + id + "`");
}

std::vector<std::string> CorpusBundle::gloss_vocab() const {
    std::vector<std::string> v;
    for (const auto& [cls, _] : exemplars) v.push_back(cls);
    return v;  // ExemplarSet is an ordered map
}

CorpusBundle generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    CorpusBundle bundle;

    // class centers, spread apart; shared across domains
    std::vector<Tensor2> centers(cfg.vocab_size);
    for (auto& c : centers) {
        c = unit_vector(cfg.feature_dim, rng);
        for (double& x : c.data) x *= cfg.class_center_spread;
    }
    Tensor2 gap = unit_vector(cfg.feature_dim, rng);
    for (double& x : gap.data) x *= cfg.domain_gap_offset;
    std::vector<Householder> rotations;
    if (cfg.rotation_gap) {
        rotations.resize(cfg.vocab_size);
        for (auto& h : rotations) h.u = unit_vector(cfg.feature_dim, rng);
    }

    auto sign_frames = [&](std::size_t cls, std::size_t n, bool continuous) {
        Tensor2 f(n, cfg.feature_dim);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < cfg.feature_dim; ++j)
                f.at(i, j) = centers[cls].data[j] + rng.normal(0, cfg.noise_sigma);
            if (continuous) {
                if (cfg.rotation_gap) rotations[cls].apply(&f.data[i * cfg.feature_dim], cfg.feature_dim);
                for (std::size_t j = 0; j < cfg.feature_dim; ++j) f.at(i, j) += gap.data[j];
            }
        }
        return f;
    };
    auto in_range = [&](const CountRange& r) {
        return r.lo + (r.hi > r.lo ? rng.index(r.hi - r.lo + 1) : 0);
    };

    // lexicon-domain exemplars
    for (std::size_t c = 0; c < cfg.vocab_size; ++c) {
        std::vector<FeatureSequence> clips;
        for (std::size_t e = 0; e < cfg.exemplars_per_class; ++e) {
            std::size_t n = in_range(cfg.frames_per_sign);
            clips.push_back({gloss_name(c) + "/ex" + std::to_string(e), sign_frames(c, n, false)});
        }
        bundle.exemplars[gloss_name(c)] = std::move(clips);
    }

    const std::size_t n_fillers = 10;
    std::vector<std::string> vocab_order(cfg.vocab_size);
    for (std::size_t c = 0; c < cfg.vocab_size; ++c) vocab_order[c] = gloss_name(c);

    std::size_t video_counter = 0;
    auto make_split = [&](std::size_t count, std::vector<std::string>& ids) {
        for (std::size_t n = 0; n < count; ++n) {
            std::string id = "v" + std::to_string(video_counter++);
            ids.push_back(id);

            std::size_t nsigns = in_range(cfg.signs_per_video);
            std::vector<std::size_t> classes(cfg.vocab_size);
            for (std::size_t c = 0; c < cfg.vocab_size; ++c) classes[c] = c;
            rng.shuffle(classes);
            classes.resize(nsigns);

            std::vector<Tensor2> segments;
            std::vector<std::pair<std::size_t, std::size_t>> spans;  // per sign, frame span
            std::size_t cursor = 0;
            auto filler = [&]() {
                std::size_t nf = in_range(cfg.filler_frames);
                Tensor2 f(nf, cfg.feature_dim);
                for (double& x : f.data) x = rng.normal(0, cfg.noise_sigma);
                for (std::size_t i = 0; i < nf; ++i)
                    for (std::size_t j = 0; j < cfg.feature_dim; ++j)
                        f.at(i, j) += gap.data[j];
                cursor += nf;
                return f;
            };
            segments.push_back(filler());
            for (std::size_t s = 0; s < nsigns; ++s) {
                std::size_t len = in_range(cfg.frames_per_sign);
                spans.emplace_back(cursor, cursor + len);
                segments.push_back(sign_frames(classes[s], len, true));
                cursor += len;
                segments.push_back(filler());
            }
            Tensor2 features(cursor, cfg.feature_dim);
            std::size_t row = 0;
            for (const auto& seg : segments) {
                std::copy(seg.data.begin(), seg.data.end(),
                          features.data.begin() + row * cfg.feature_dim);
                row += seg.rows;
            }
            bundle.videos.push_back({id, std::move(features)});

            // subtitle spans the signing portion with a small pad
            std::size_t t_begin = spans.front().first >= 2 ? spans.front().first - 2 : 0;
            std::size_t t_end = std::min(spans.back().second + 2, cursor);
            std::vector<std::string> words;
            for (std::size_t s = 0; s < nsigns; ++s) {
                std::string w = gloss_name(classes[s]);
                if (rng.bernoulli(cfg.inflect_rate)) w += "ing";
                words.push_back(w);
                if (rng.bernoulli(cfg.text_filler_rate))
                    words.push_back(filler_name(rng.index(n_fillers)));
            }
            rng.shuffle(words);
            std::string text;
            for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
            bundle.subtitles.push_back({id, t_begin, t_end, text});

            for (std::size_t s = 0; s < nsigns; ++s)
                bundle.plants.push_back({id, gloss_name(classes[s]), spans[s].first,
                                         spans[s].second});

            // mouthing candidates with calibrated noise
            for (std::size_t s = 0; s < nsigns; ++s) {
                if (!rng.bernoulli(cfg.mouthing_recall)) continue;
                std::size_t mid = (spans[s].first + spans[s].second) / 2;
                bundle.mouthing.push_back({id, gloss_name(classes[s]), mid,
                                           rng.uniform(0.4, 0.95)});
                if (cfg.mouthing_precision < 1.0 &&
                    rng.bernoulli(1.0 - cfg.mouthing_precision)) {
                    bundle.mouthing.push_back({id, gloss_name(rng.index(cfg.vocab_size)),
                                               rng.index(cursor), rng.uniform(0.3, 0.9)});
                }
            }
        }
    };
    make_split(cfg.n_train, bundle.train_ids);
    make_split(cfg.n_val, bundle.val_ids);
    make_split(cfg.n_test, bundle.test_ids);

    // word-embedding table: glosses, their -ing inflections, fillers, <unk>
    std::size_t n_words = cfg.vocab_size * 2 + n_fillers + 1;
    bundle.table.vectors = Tensor2(n_words, cfg.word_dim);
    std::size_t widx = 0;
    auto add_word = [&](const std::string& w, const Tensor2& vec) {
        for (std::size_t j = 0; j < cfg.word_dim; ++j) bundle.table.vectors.at(widx, j) = vec.data[j];
        bundle.table.vocab[w] = widx++;
    };
    for (std::size_t c = 0; c < cfg.vocab_size; ++c) {
        Tensor2 base = unit_vector(cfg.word_dim, rng);
        add_word(gloss_name(c), base);
        Tensor2 inflected = base;  // inflection stays close to the base word
        for (double& x : inflected.data) x += rng.normal(0, 0.1);
        add_word(gloss_name(c) + "ing", inflected);
    }
    for (std::size_t f = 0; f < n_fillers; ++f) add_word(filler_name(f), unit_vector(cfg.word_dim, rng));
    add_word("<unk>", Tensor2(1, cfg.word_dim));
    bundle.table.unk_index = bundle.table.vocab.at("<unk>");

    return bundle;
}

std::vector<SubtitleRecord> perturb_alignment(const std::vector<SubtitleRecord>& subtitles,
                                              const CorpusBundle& bundle,
                                              double shift_mean, double shift_sigma,
                                              std::uint64_t seed) {
    Rng rng(seed);
    std::vector<SubtitleRecord> out = subtitles;
    for (auto& s : out) {
        long shift = std::lround(rng.normal(shift_mean, shift_sigma));
        long frames = static_cast<long>(bundle.video(s.video_id).frames());
        long len = static_cast<long>(s.t_end - s.t_begin);
        long b = static_cast<long>(s.t_begin) + shift;
        b = std::clamp(b, 0L, std::max(frames - len, 0L));
        long e = std::min(b + len, frames);
        s.t_begin = static_cast<std::size_t>(b);
        s.t_end = static_cast<std::size_t>(std::max(e, b + 1));
    }
    return out;
}

namespace {
FeatureSequence crop(const FeatureSequence& v, const SubtitleRecord& s) {
    std::size_t b = std::min(s.t_begin, v.frames() - 1);
    std::size_t e = std::clamp(s.t_end, b + 1, v.frames());
    Tensor2 f(e - b, v.dim());
    for (std::size_t i = 0; i < e - b; ++i)
        for (std::size_t j = 0; j < v.dim(); ++j)
            f.at(i, j) = v.features.at(b + i, j);
    return {v.video_id, std::move(f)};
}
}  // namespace

PairedCorpus make_paired(const CorpusBundle& bundle, Split split) {
    return make_paired(bundle, split, bundle.subtitles);
}

PairedCorpus make_paired(const CorpusBundle& bundle, Split split,
                         const std::vector<SubtitleRecord>& subtitles) {
    std::unordered_map<std::string, const SubtitleRecord*> by_id;
    for (const auto& s : subtitles) by_id[s.video_id] = &s;
    PairedCorpus pc;
    pc.split = split;
    for (const auto& id : bundle.ids(split)) {
        auto it = by_id.find(id);
        if (it == by_id.end())
            throw std::invalid_argument("make_paired: no subtitle for `" + id + "`");
        const SubtitleRecord& s = *it->second;
        pc.videos.push_back(crop(bundle.video(id), s));
        pc.texts.push_back({id, tokenize(s.text)});
    }
    return pc;
}

SpotCorpus make_spot_corpus(const CorpusBundle& bundle, Split split) {
    SpotCorpus sc;
    for (const auto& id : bundle.ids(split)) {
        sc.videos.push_back(bundle.video(id));
        sc.subtitles.push_back({id, tokenize(bundle.subtitle(id).text)});
    }
    return sc;
}

void save_features(const std::string& path, const std::vector<FeatureSequence>& seqs) {
    BlobFile f;
    f.manifest.push_back("dtype f32");
    f.manifest.push_back("endianness little");
    for (const auto& s : seqs) {
        f.manifest.push_back("seq " + s.video_id + " " + std::to_string(s.frames()) + " " +
                             std::to_string(s.dim()));
        f.append(s.features);
    }
    f.save(path, kFeatMagic);
}

std::vector<FeatureSequence> load_features(const std::string& path) {
    BlobFile f = BlobFile::load(path, kFeatMagic);
    std::vector<FeatureSequence> out;
    std::size_t off = 0;
    for (const auto& line : f.manifest) {
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "dtype") {
            std::string d;
            ss >> d;
            if (d != "f32") throw std::runtime_error(path + ": unsupported dtype " + d);
        } else if (key == "endianness") {
            std::string e;
            ss >> e;
            if (e != "little") throw std::runtime_error(path + ": unsupported endianness " + e);
        } else if (key == "seq") {
            std::string id;
            std::size_t t = 0, d = 0;
            if (!(ss >> id >> t >> d))
                throw std::runtime_error(path + ": malformed seq line `" + line + "`");
            out.push_back({id, f.take(&off, t, d, path)});
        } else {
            throw std::runtime_error(path + ": unknown manifest key `" + key + "`");
        }
    }
    if (off != f.blob.size())
        throw std::runtime_error(path + ": manifest/blob length mismatch (trailing data)");
    return out;
}

std::vector<SubtitleRecord> load_subtitles(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open subtitles: " + path);
    std::vector<SubtitleRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        SubtitleRecord s;
        if (!(ss >> s.video_id >> s.t_begin >> s.t_end))
            throw std::runtime_error(path + ": malformed subtitle line `" + line + "`");
        std::getline(ss, s.text);
        if (!s.text.empty() && s.text.front() == ' ') s.text.erase(0, 1);
        out.push_back(std::move(s));
    }
    return out;
}

void save_subtitles(const std::string& path, const std::vector<SubtitleRecord>& subtitles) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write subtitles: " + path);
    for (const auto& s : subtitles)
        out << s.video_id << " " << s.t_begin << " " << s.t_end << " " << s.text << "\n";
}

void save_bundle(const std::string& dir, const CorpusBundle& bundle) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    save_features(dir + "/features.bin", bundle.videos);
    std::vector<FeatureSequence> ex;
    for (const auto& [cls, clips] : bundle.exemplars)
        for (const auto& c : clips) ex.push_back(c);
    save_features(dir + "/exemplars.bin", ex);
    save_subtitles(dir + "/subtitles.txt", bundle.subtitles);
    bundle.table.save(dir + "/embeddings.txt");
    save_mouthing(dir + "/mouthing.txt", bundle.mouthing);
    {
        std::ofstream out(dir + "/plants.txt");
        for (const auto& p : bundle.plants)
            out << p.video_id << " " << p.sign_class << " " << p.begin << " " << p.end << "\n";
    }
    {
        std::ofstream out(dir + "/splits.txt");
        for (const auto& id : bundle.train_ids) out << "train " << id << "\n";
        for (const auto& id : bundle.val_ids) out << "val " << id << "\n";
        for (const auto& id : bundle.test_ids) out << "test " << id << "\n";
    }
}

CorpusBundle load_bundle(const std::string& dir) {
    CorpusBundle bundle;
    bundle.videos = load_features(dir + "/features.bin");
    for (auto& seq : load_features(dir + "/exemplars.bin")) {
        auto slash = seq.video_id.find('/');
        if (slash == std::string::npos)
            throw std::runtime_error(dir + "/exemplars.bin: exemplar id `" + seq.video_id +
                                     "` missing class prefix");
        bundle.exemplars[seq.video_id.substr(0, slash)].push_back(std::move(seq));
    }
    bundle.subtitles = load_subtitles(dir + "/subtitles.txt");
    bundle.table = WordEmbeddingTable::load(dir + "/embeddings.txt");
    bundle.mouthing = load_mouthing(dir + "/mouthing.txt");
    {
        std::ifstream in(dir + "/plants.txt");
        if (!in) throw std::runtime_error("cannot open " + dir + "/plants.txt");
        PlantRecord p;
        while (in >> p.video_id >> p.sign_class >> p.begin >> p.end) bundle.plants.push_back(p);
    }
    {
        std::ifstream in(dir + "/splits.txt");
        if (!in) throw std::runtime_error("cannot open " + dir + "/splits.txt");
        std::string split, id;
        while (in >> split >> id) {
            if (split == "train") bundle.train_ids.push_back(id);
            else if (split == "val") bundle.val_ids.push_back(id);
            else if (split == "test") bundle.test_ids.push_back(id);
            else throw std::runtime_error(dir + "/splits.txt: unknown split `" + split + "`");
        }
    }
    return bundle;
}

}  // namespace slr
