#include "slr/recognizer.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "slr/blobfile.hpp"

namespace slr {

namespace {
constexpr const char* kSrMagic = "SLRCKPT1";

Tensor2 mean_rows(const Tensor2& m) {
    Tensor2 out(1, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j)
            out.data[j] += m.at(i, j);
    for (double& v : out.data) v /= static_cast<double>(m.rows);
    return out;
}

// Mean-pooled window at every stride-1 position via prefix sums: T' x D.
Tensor2 pooled_windows(const Tensor2& features, std::size_t w) {
    const std::size_t t = features.rows, d = features.cols;
    const std::size_t tp = t - w + 1;
    Tensor2 prefix(t + 1, d);
    for (std::size_t i = 0; i < t; ++i)
        for (std::size_t j = 0; j < d; ++j)
            prefix.at(i + 1, j) = prefix.at(i, j) + features.at(i, j);
    Tensor2 out(tp, d);
    const double inv = 1.0 / static_cast<double>(w);
    for (std::size_t p = 0; p < tp; ++p)
        for (std::size_t j = 0; j < d; ++j)
            out.at(p, j) = (prefix.at(p + w, j) - prefix.at(p, j)) * inv;
    return out;
}
}  // namespace

WindowClassifier WindowClassifier::init(std::size_t window_len, std::size_t input_dim,
                                        std::size_t hidden_dim,
                                        std::vector<std::string> class_vocab, Rng& rng) {
    WindowClassifier c;
    c.window_len = window_len;
    c.input_dim = input_dim;
    c.hidden_dim = hidden_dim;
    c.class_vocab = std::move(class_vocab);
    auto randm = [&](std::size_t r, std::size_t cc, double scale) {
        Tensor2 t(r, cc);
        for (double& v : t.data) v = rng.normal(0, scale);
        return t;
    };
    c.w1 = ParamGrad("clf_w1", randm(input_dim, hidden_dim, 1.0 / std::sqrt((double)input_dim)));
    c.b1 = ParamGrad("clf_b1", Tensor2(1, hidden_dim));
    c.w2 = ParamGrad("clf_w2", randm(hidden_dim, c.class_vocab.size(),
                                     1.0 / std::sqrt((double)hidden_dim)));
    c.b2 = ParamGrad("clf_b2", Tensor2(1, c.class_vocab.size()));
    return c;
}

std::vector<ParamGrad*> WindowClassifier::params() {
    return {&w1, &b1, &w2, &b2};
}

double train_classifier(const std::vector<ClipSample>& clips, WindowClassifier& clf,
                        const ClassifierTrainConfig& cfg) {
    if (clips.empty())
        throw std::invalid_argument("train_classifier: no clips");
    std::set<std::size_t> seen;
    for (const auto& c : clips) {
        if (c.features.rows != clf.window_len || c.features.cols != clf.input_dim)
            throw std::invalid_argument("train_classifier: clip shape " + c.features.shape_str() +
                                        " does not match classifier window " +
                                        std::to_string(clf.window_len) + "x" +
                                        std::to_string(clf.input_dim));
        if (c.label >= clf.num_classes())
            throw std::invalid_argument("train_classifier: label out of range");
        seen.insert(c.label);
    }
    if (seen.size() < 2)
        throw std::invalid_argument("train_classifier: need at least 2 classes, got " +
                                    std::to_string(seen.size()));

    OptimizerConfig ocfg;
    ocfg.kind = OptimizerKind::sgd_momentum;
    ocfg.learning_rate = cfg.learning_rate;
    ocfg.momentum = cfg.momentum;
    ocfg.weight_decay = cfg.weight_decay;
    Optimizer opt(ocfg);
    Rng rng(cfg.seed);
    auto params = clf.params();

    std::vector<std::size_t> order(clips.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    double last_epoch_loss = 0;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        opt.config().learning_rate =
            epoch >= cfg.decay_epoch ? cfg.learning_rate / cfg.decay_factor : cfg.learning_rate;
        rng.shuffle(order);
        double loss_sum = 0;
        std::size_t count = 0;
        for (std::size_t start = 0; start < clips.size(); start += cfg.batch_size) {
            std::size_t end = std::min(start + cfg.batch_size, clips.size());
            zero_grads(params);
            for (std::size_t n = start; n < end; ++n) {
                const ClipSample& clip = clips[order[n]];
                Tensor2 pooled = mean_rows(clip.features);
                Tensor2 h_pre = affine_forward(pooled, clf.w1.value, clf.b1.value);
                Tensor2 h = relu(h_pre);
                Tensor2 logits = affine_forward(h, clf.w2.value, clf.b2.value);
                Tensor2 probs = softmax(logits);
                loss_sum += -std::log(std::max(probs.data[clip.label], 1e-300));
                ++count;

                double scale = 1.0 / static_cast<double>(end - start);
                Tensor2 dlogits = probs;
                dlogits.data[clip.label] -= 1.0;
                for (double& v : dlogits.data) v *= scale;
                Tensor2 dh(1, clf.hidden_dim);
                affine_backward(h, clf.w2.value, dlogits, &dh, &clf.w2.grad, &clf.b2.grad);
                Tensor2 dh_pre(1, clf.hidden_dim);
                relu_backward(h_pre, dh, dh_pre);
                affine_backward(pooled, clf.w1.value, dh_pre, nullptr, &clf.w1.grad, &clf.b1.grad);
            }
            opt.step(params);
        }
        last_epoch_loss = count ? loss_sum / static_cast<double>(count) : 0.0;
    }
    return last_epoch_loss;
}

double classifier_accuracy(const std::vector<ClipSample>& clips, const WindowClassifier& clf) {
    if (clips.empty()) return 0;
    std::size_t hits = 0;
    for (const auto& clip : clips) {
        Tensor2 pooled = mean_rows(clip.features);
        Tensor2 h = relu(affine_forward(pooled, clf.w1.value, clf.b1.value));
        Tensor2 logits = affine_forward(h, clf.w2.value, clf.b2.value);
        std::size_t best = 0;
        for (std::size_t c = 1; c < logits.cols; ++c)
            if (logits.data[c] > logits.data[best]) best = c;
        if (best == clip.label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(clips.size());
}

Tensor2 latent_embed(const FeatureSequence& seq, const WindowClassifier& clf) {
    if (seq.frames() < clf.window_len)
        throw std::invalid_argument("latent_embed: sequence of " + std::to_string(seq.frames()) +
                                    " frames shorter than window " +
                                    std::to_string(clf.window_len));
    Tensor2 pooled = pooled_windows(seq.features, clf.window_len);
    return relu(affine_forward(pooled, clf.w1.value, clf.b1.value));
}

std::vector<WindowPrediction> sliding_window_predict(const FeatureSequence& seq,
                                                     const WindowClassifier& clf) {
    Tensor2 latents = latent_embed(seq, clf);
    Tensor2 logits = affine_forward(latents, clf.w2.value, clf.b2.value);
    Tensor2 probs = softmax(logits);
    std::vector<WindowPrediction> out(latents.rows);
    for (std::size_t p = 0; p < latents.rows; ++p) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < probs.cols; ++c)
            if (probs.at(p, c) > probs.at(p, best)) best = c;  // ties keep lowest index
        out[p] = {p, best, probs.at(p, best)};
    }
    return out;
}

Lemmatizer Lemmatizer::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open lemma table: " + path);
    Lemmatizer lem;
    std::string surface, target;
    while (in >> surface >> target) lem.irregulars[surface] = target;
    return lem;
}

namespace {
bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

// Undo consonant doubling after stripping a suffix (running -> runn -> run).
// Restricted to finals that commonly double; silent-e restores live in the
// irregulars table.
void undo_doubling(std::string& s) {
    static const std::string doublers = "bdgmnprt";
    if (s.size() >= 3 && s[s.size() - 1] == s[s.size() - 2] &&
        doublers.find(s.back()) != std::string::npos)
        s.pop_back();
}

std::string apply_rules(const std::string& w) {
    auto ends = [&](const char* suf) {
        std::string s(suf);
        return w.size() > s.size() && w.compare(w.size() - s.size(), s.size(), s) == 0;
    };
    if (ends("ies") && w.size() > 4)
        return w.substr(0, w.size() - 3) + "y";
    if (ends("es") && w.size() > 3) {
        std::string stem = w.substr(0, w.size() - 2);
        if (stem.size() >= 1) {
            char last = stem.back();
            bool sibilant = last == 's' || last == 'x' || last == 'z' ||
                            (stem.size() >= 2 && ((stem[stem.size() - 2] == 'c' && last == 'h') ||
                                                  (stem[stem.size() - 2] == 's' && last == 'h')));
            if (sibilant) return stem;
        }
    }
    if (w.size() > 3 && w.back() == 's' && w[w.size() - 2] != 's' && !ends("us") && !ends("is"))
        return w.substr(0, w.size() - 1);
    if (ends("ing") && w.size() > 5) {
        std::string stem = w.substr(0, w.size() - 3);
        if (!is_vowel(stem.back())) {
            undo_doubling(stem);
            return stem;
        }
    }
    if (ends("ed") && w.size() > 4) {
        std::string stem = w.substr(0, w.size() - 2);
        if (!is_vowel(stem.back())) {
            undo_doubling(stem);
            return stem;
        }
    }
    return w;
}
}  // namespace

std::string Lemmatizer::lemma(const std::string& word) const {
    auto it = irregulars.find(word);
    if (it != irregulars.end()) return it->second;
    return apply_rules(word);
}

std::string lemmatize(const std::string& word) {
    static const Lemmatizer plain;
    return plain.lemma(word);
}

WordSet extract_word_set(const std::vector<WindowPrediction>& predictions,
                         const WindowClassifier& clf, double threshold,
                         const Lemmatizer* lem) {
    if (threshold < 0 || threshold > 1)
        throw std::invalid_argument("extract_word_set: threshold outside [0,1]");
    static const Lemmatizer plain;
    const Lemmatizer& l = lem ? *lem : plain;
    WordSet out;
    for (const auto& p : predictions)
        if (p.prob > threshold)
            out.insert(l.lemma(clf.class_vocab[p.cls]));
    return out;
}

WordSet lemmatize_tokens(const std::vector<std::string>& tokens, const Lemmatizer* lem) {
    static const Lemmatizer plain;
    const Lemmatizer& l = lem ? *lem : plain;
    WordSet out;
    for (const auto& t : tokens) out.insert(l.lemma(t));
    return out;
}

double iou_similarity(const WordSet& a, const WordSet& b) {
    if (a.empty() && b.empty()) return 0.0;
    std::size_t inter = 0;
    for (const auto& w : a)
        if (b.count(w)) ++inter;
    std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

SimilarityMatrix sr_similarity_matrix(const std::vector<TextSequence>& queries,
                                      const std::vector<FeatureSequence>& videos,
                                      const WindowClassifier& clf, double threshold,
                                      const Lemmatizer* lem) {
    std::vector<WordSet> video_sets(videos.size());
    for (std::size_t v = 0; v < videos.size(); ++v)
        video_sets[v] = extract_word_set(sliding_window_predict(videos[v], clf), clf,
                                         threshold, lem);
    SimilarityMatrix sim;
    sim.scores = Tensor2(queries.size(), videos.size());
    for (std::size_t q = 0; q < queries.size(); ++q) {
        WordSet qset = lemmatize_tokens(queries[q].tokens, lem);
        for (std::size_t v = 0; v < videos.size(); ++v)
            sim.scores.at(q, v) = iou_similarity(qset, video_sets[v]);
        sim.row_ids.push_back(queries[q].text_id);
    }
    for (const auto& v : videos) sim.col_ids.push_back(v.video_id);
    sim.ground_truth.resize(queries.size());
    for (std::size_t q = 0; q < queries.size(); ++q) sim.ground_truth[q] = q;
    return sim;
}

void save_sr_checkpoint(const std::string& path, WindowClassifier& clf, std::uint64_t seed) {
    BlobFile f;
    f.manifest.push_back("kind sr");
    f.manifest.push_back("window_len " + std::to_string(clf.window_len));
    f.manifest.push_back("input_dim " + std::to_string(clf.input_dim));
    f.manifest.push_back("hidden_dim " + std::to_string(clf.hidden_dim));
    f.manifest.push_back("seed " + std::to_string(seed));
    for (const auto& w : clf.class_vocab) f.manifest.push_back("class " + w);
    for (ParamGrad* p : clf.params()) {
        f.manifest.push_back("param " + p->name + " " + std::to_string(p->value.rows) + " " +
                             std::to_string(p->value.cols));
        f.append(p->value);
    }
    f.save(path, kSrMagic);
}

WindowClassifier load_sr_checkpoint(const std::string& path) {
    BlobFile f = BlobFile::load(path, kSrMagic);
    std::size_t wl = 0, id = 0, hd = 0;
    std::vector<std::string> classes;
    std::vector<std::string> param_lines;
    for (const auto& line : f.manifest) {
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "kind") {
            std::string kind;
            ss >> kind;
            if (kind != "sr") throw std::runtime_error(path + ": not an sr checkpoint");
        } else if (key == "window_len") ss >> wl;
        else if (key == "input_dim") ss >> id;
        else if (key == "hidden_dim") ss >> hd;
        else if (key == "seed") { /* informational */ }
        else if (key == "class") { std::string w; ss >> w; classes.push_back(w); }
        else if (key == "param") param_lines.push_back(line);
        else throw std::runtime_error(path + ": unknown manifest key `" + key + "`");
    }
    Rng dummy(0);
    WindowClassifier clf = WindowClassifier::init(wl, id, hd, classes, dummy);
    auto params = clf.params();
    if (param_lines.size() != params.size())
        throw std::runtime_error(path + ": parameter count mismatch");
    std::size_t off = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        std::istringstream ss(param_lines[i]);
        std::string key, name;
        std::size_t r = 0, c = 0;
        ss >> key >> name >> r >> c;
        if (name != params[i]->name || r != params[i]->value.rows || c != params[i]->value.cols)
            throw std::runtime_error(path + ": bad param entry `" + name + "`");
        params[i]->value = f.take(&off, r, c, path);
    }
    return clf;
}

}  // namespace slr
