#include "slr/spotalign.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace slr {

std::vector<MouthingCandidate> load_mouthing(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open mouthing file: " + path);
    std::vector<MouthingCandidate> out;
    MouthingCandidate c;
    while (in >> c.video_id >> c.word >> c.frame_index >> c.confidence) out.push_back(c);
    return out;
}

void save_mouthing(const std::string& path, const std::vector<MouthingCandidate>& candidates) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write mouthing file: " + path);
    char buf[64];
    for (const auto& c : candidates) {
        std::snprintf(buf, sizeof(buf), " %zu %.6f", c.frame_index, c.confidence);
        out << c.video_id << " " << c.word << buf << "\n";
    }
}

std::vector<SpotAnnotation> load_annotations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open annotation file: " + path);
    std::vector<SpotAnnotation> out;
    SpotAnnotation a;
    while (in >> a.video_id >> a.sign_class >> a.frame_index >> a.confidence >> a.source)
        out.push_back(a);
    return out;
}

void save_annotations(const std::string& path, const std::vector<SpotAnnotation>& annotations) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write annotation file: " + path);
    char buf[64];
    for (const auto& a : annotations) {
        std::snprintf(buf, sizeof(buf), " %zu %.6f ", a.frame_index, a.confidence);
        out << a.video_id << " " << a.sign_class << buf << a.source << "\n";
    }
}

std::vector<SpotAnnotation> filter_mouthing(const std::vector<MouthingCandidate>& candidates,
                                            double threshold,
                                            const std::set<std::string>& vocab_filter) {
    if (threshold < 0 || threshold > 1)
        throw std::invalid_argument("filter_mouthing: threshold outside [0,1]");
    std::vector<SpotAnnotation> out;
    for (const auto& c : candidates) {
        if (c.confidence <= threshold) continue;
        if (!vocab_filter.count(c.word)) continue;
        out.push_back({c.video_id, c.word, c.frame_index, c.confidence, "M"});
    }
    return out;
}

std::set<std::string> candidate_words(const TextSequence& subtitle,
                                      const std::set<std::string>& lexicon_vocab,
                                      const Lemmatizer* lem) {
    std::set<std::string> out;
    for (const auto& tok : subtitle.tokens) {
        if (lexicon_vocab.count(tok)) out.insert(tok);
        std::string l = lem ? lem->lemma(tok) : lemmatize(tok);
        if (lexicon_vocab.count(l)) out.insert(l);
    }
    return out;
}

namespace {

Tensor2 pooled_latent_rows(const Tensor2& latents, std::size_t begin, std::size_t end) {
    // inclusive range over latent rows, clamped by caller
    Tensor2 out(1, latents.cols);
    for (std::size_t i = begin; i <= end; ++i)
        for (std::size_t j = 0; j < latents.cols; ++j)
            out.data[j] += latents.at(i, j);
    for (double& v : out.data) v /= static_cast<double>(end - begin + 1);
    return out;
}

double cosine(const Tensor2& a, const Tensor2& b) {
    double na = a.frobenius_norm(), nb = b.frobenius_norm();
    if (na == 0 || nb == 0) return 0.0;
    return dot(a, b) / (na * nb);
}

Tensor2 exemplar_embedding(const FeatureSequence& clip, const WindowClassifier& clf) {
    Tensor2 latents = latent_embed(clip, clf);
    return pooled_latent_rows(latents, 0, latents.rows - 1);
}

// Window embedding per position: pooled mode averages latent rows over a
// window_len span, single mode takes the row itself.
std::vector<Tensor2> window_embeddings(const Tensor2& latents, std::size_t window_len,
                                       SpotEmbedMode mode) {
    std::vector<Tensor2> out(latents.rows);
    for (std::size_t t = 0; t < latents.rows; ++t) {
        if (mode == SpotEmbedMode::single) {
            out[t] = latents.row_at(t);
        } else {
            std::size_t end = std::min(t + window_len - 1, latents.rows - 1);
            out[t] = pooled_latent_rows(latents, t, end);
        }
    }
    return out;
}

}  // namespace

std::vector<SpotAnnotation> dictionary_spot(const FeatureSequence& video,
                                            const std::set<std::string>& queries,
                                            const ExemplarSet& exemplars,
                                            const WindowClassifier& clf,
                                            const SpotConfig& cfg, std::size_t iteration) {
    if (video.frames() < clf.window_len)
        throw std::invalid_argument("dictionary_spot: video `" + video.video_id +
                                    "` shorter than one window");
    Tensor2 latents = latent_embed(video, clf);
    std::vector<Tensor2> windows = window_embeddings(latents, clf.window_len, cfg.embed_mode);
    std::string source = "D" + std::to_string(iteration);

    std::vector<SpotAnnotation> out;
    for (const auto& q : queries) {
        auto it = exemplars.find(q);
        if (it == exemplars.end()) {
            std::cerr << "warning: no exemplars for queried class `" << q << "`, skipping\n";
            continue;
        }
        std::vector<Tensor2> ex_embs;
        for (const auto& clip : it->second) ex_embs.push_back(exemplar_embedding(clip, clf));

        double best_sim = -2.0;
        std::size_t best_t = 0;
        for (std::size_t t = 0; t < windows.size(); ++t) {
            double s = -2.0;
            for (const auto& e : ex_embs) s = std::max(s, cosine(e, windows[t]));
            if (s > best_sim) { best_sim = s; best_t = t; }
        }
        if (best_sim > cfg.threshold)
            out.push_back({video.video_id, q, best_t, best_sim, source});
    }
    return out;
}

FrameRange clip_window(const SpotAnnotation& a, std::size_t video_frames) {
    if (video_frames == 0 || a.frame_index >= video_frames)
        throw std::invalid_argument("clip_window: annotation at frame " +
                                    std::to_string(a.frame_index) + " outside video of " +
                                    std::to_string(video_frames) + " frames");
    long t = static_cast<long>(a.frame_index);
    long b, e;
    if (a.source == "M") { b = t - 15; e = t + 4; }
    else { b = t - 3; e = t + 22; }
    b = std::max(b, 0L);
    e = std::min(e, static_cast<long>(video_frames) - 1);
    return {static_cast<std::size_t>(b), static_cast<std::size_t>(e)};
}

std::vector<SpotAnnotation> SpotAlignState::current_annotations() const {
    std::vector<SpotAnnotation> out = mouthing;
    if (!dictionary.empty()) {
        const auto& last = dictionary.back();
        out.insert(out.end(), last.begin(), last.end());
    }
    return out;
}

namespace {

Tensor2 slice_rows(const Tensor2& m, std::size_t begin, std::size_t count) {
    Tensor2 out(count, m.cols);
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t j = 0; j < m.cols; ++j)
            out.at(i, j) = m.at(begin + i, j);
    return out;
}

// Sample a window_len slice whose frames lie inside (or as close as possible
// to) the clip window.
Tensor2 sample_window(const Tensor2& features, FrameRange range, std::size_t window_len,
                      Rng& rng) {
    std::size_t max_start = features.rows - window_len;  // caller checked rows >= window_len
    std::size_t lo, hi;
    if (range.end + 1 >= range.begin + window_len) {
        // window fits fully inside the clip range
        lo = range.begin;
        hi = range.end + 1 - window_len;
    } else {
        // range shorter than a window: any start that covers it
        lo = range.end + 1 >= window_len ? range.end + 1 - window_len : 0;
        hi = range.begin;
    }
    lo = std::min(lo, max_start);
    hi = std::min(std::max(hi, lo), max_start);
    std::size_t start = lo + (hi > lo ? rng.index(hi - lo + 1) : 0);
    return slice_rows(features, start, window_len);
}

}  // namespace

SpotAlignState spot_align_round(const SpotAlignState& state, const SpotCorpus& corpus,
                                const ExemplarSet& exemplars, const SpotAlignConfig& cfg) {
    if (corpus.videos.size() != corpus.subtitles.size())
        throw std::invalid_argument("spot_align_round: videos/subtitles misaligned");

    std::vector<std::string> class_vocab;
    for (const auto& [cls, _] : exemplars) class_vocab.push_back(cls);
    std::unordered_map<std::string, std::size_t> class_index;
    for (std::size_t i = 0; i < class_vocab.size(); ++i) class_index[class_vocab[i]] = i;

    std::unordered_map<std::string, std::size_t> video_index;
    for (std::size_t i = 0; i < corpus.videos.size(); ++i)
        video_index[corpus.videos[i].video_id] = i;

    const std::size_t next_iter = state.iteration + 1;
    Rng rng(cfg.seed + 0x9e3779b9u * next_iter);

    std::vector<ClipSample> clips;
    for (const auto& [cls, ex_clips] : exemplars) {
        for (const auto& clip : ex_clips) {
            if (clip.frames() < cfg.window_len) continue;
            for (std::size_t r = 0; r < cfg.clips_per_exemplar; ++r) {
                FrameRange full{0, clip.frames() - 1};
                clips.push_back({sample_window(clip.features, full, cfg.window_len, rng),
                                 class_index.at(cls), Domain::lexicon});
            }
        }
    }
    if (cfg.joint_training) {
        for (const auto& a : state.current_annotations()) {
            auto ci = class_index.find(a.sign_class);
            auto vi = video_index.find(a.video_id);
            if (ci == class_index.end() || vi == video_index.end()) continue;
            const FeatureSequence& video = corpus.videos[vi->second];
            if (video.frames() < cfg.window_len) continue;
            FrameRange range = clip_window(a, video.frames());
            for (std::size_t r = 0; r < cfg.clips_per_annotation; ++r)
                clips.push_back({sample_window(video.features, range, cfg.window_len, rng),
                                 ci->second, Domain::continuous});
        }
    }

    Rng init_rng(cfg.seed + 0x51ed2701u * next_iter);
    WindowClassifier clf = WindowClassifier::init(cfg.window_len, corpus.videos.empty()
                                                      ? cfg.window_len
                                                      : corpus.videos.front().dim(),
                                                  cfg.hidden_dim, class_vocab, init_rng);
    ClassifierTrainConfig tcfg = cfg.classifier;
    tcfg.seed = cfg.seed + 0xc2b2ae35u * next_iter;
    train_classifier(clips, clf, tcfg);

    std::set<std::string> lexicon_vocab(class_vocab.begin(), class_vocab.end());
    std::vector<SpotAnnotation> spotted;
    for (std::size_t v = 0; v < corpus.videos.size(); ++v) {
        if (corpus.videos[v].frames() < cfg.window_len) continue;
        std::set<std::string> queries = candidate_words(corpus.subtitles[v], lexicon_vocab);
        auto found = dictionary_spot(corpus.videos[v], queries, exemplars, clf, cfg.spot,
                                     next_iter);
        spotted.insert(spotted.end(), found.begin(), found.end());
    }

    SpotAlignState next = state;
    next.iteration = next_iter;
    next.classifier = std::move(clf);
    next.dictionary.push_back(std::move(spotted));
    next.yield_history.push_back(next.dictionary.back().size());
    return next;
}

YieldStats yield_stats(const std::vector<SpotAnnotation>& annotations) {
    YieldStats s;
    for (const auto& a : annotations) {
        ++s.per_source[a.source];
        ++s.per_class[a.sign_class];
        ++s.total;
    }
    return s;
}

std::size_t YieldStats::total_in_vocab(const std::set<std::string>& vocab) const {
    std::size_t n = 0;
    for (const auto& [cls, count] : per_class)
        if (vocab.count(cls)) n += count;
    return n;
}

double cross_domain_distance(const ExemplarSet& exemplars,
                             const std::vector<SpotAnnotation>& annotations,
                             const std::vector<FeatureSequence>& videos,
                             const WindowClassifier& clf) {
    std::unordered_map<std::string, std::size_t> video_index;
    for (std::size_t i = 0; i < videos.size(); ++i) video_index[videos[i].video_id] = i;

    std::map<std::string, std::vector<Tensor2>> lex, cont;
    for (const auto& [cls, clips] : exemplars)
        for (const auto& clip : clips)
            if (clip.frames() >= clf.window_len)
                lex[cls].push_back(exemplar_embedding(clip, clf));

    for (const auto& a : annotations) {
        auto vi = video_index.find(a.video_id);
        if (vi == video_index.end()) continue;
        const FeatureSequence& video = videos[vi->second];
        if (video.frames() < clf.window_len) continue;
        Tensor2 latents = latent_embed(video, clf);
        FrameRange range = clip_window(a, video.frames());
        std::size_t b = std::min(range.begin, (std::size_t)latents.rows - 1);
        std::size_t e = std::min(range.end, (std::size_t)latents.rows - 1);
        cont[a.sign_class].push_back(pooled_latent_rows(latents, b, e));
    }

    double sum = 0;
    std::size_t n = 0;
    for (const auto& [cls, lex_embs] : lex) {
        auto it = cont.find(cls);
        if (it == cont.end()) continue;
        for (const auto& a : lex_embs)
            for (const auto& b : it->second) {
                sum += 1.0 - cosine(a, b);
                ++n;
            }
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace slr
