#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "slr/corpus.hpp"
#include "slr/recognizer.hpp"
#include "slr/retrieval.hpp"
#include "slr/spotalign.hpp"
#include "slr/trainer.hpp"

namespace fs = std::filesystem;
using namespace slr;

namespace {

struct ConfigWriter {
    std::vector<std::pair<std::string, std::string>> entries;

    template <typename T>
    void add(const std::string& key, const T& value) {
        std::ostringstream ss;
        ss << value;
        entries.emplace_back(key, ss.str());
    }

    void write(const fs::path& dir, const std::string& command) const {
        fs::create_directories(dir);
        std::ofstream out(dir / "config.txt");
        if (!out) throw std::runtime_error("cannot write " + (dir / "config.txt").string());
        out << "command " << command << "\n";
        for (const auto& [k, v] : entries) out << k << " " << v << "\n";
    }
};

std::string fmt(double v, int precision = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
    return buf;
}

void write_metrics(const fs::path& path, const Metrics& m, const std::string& task) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "task " << task << "\n";
    for (const auto& [k, v] : m.r_at) out << "R@" << k << " " << fmt(v) << "\n";
    out << "MedR " << fmt(m.med_r, 2) << "\n";
}

void eval_both_directions(const SimilarityMatrix& sim, const fs::path& dir,
                          const std::string& tag) {
    Metrics t2v = evaluate(sim, {1, 5, 10}, Direction::t2v);
    write_metrics(dir / (tag + "_t2v.txt"), t2v, tag + "_t2v");
    if (sim.scores.rows == sim.scores.cols) {
        Metrics v2t = evaluate(transpose_with_inverted_truth(sim), {1, 5, 10}, Direction::v2t);
        write_metrics(dir / (tag + "_v2t.txt"), v2t, tag + "_v2t");
    }
}

// SR word sets per video, fanned out over worker threads; reduction order is
// the fixed video order, so the result is independent of the worker count.
SimilarityMatrix sr_similarity_parallel(const std::vector<TextSequence>& queries,
                                        const std::vector<FeatureSequence>& videos,
                                        const WindowClassifier& clf, double threshold,
                                        const Lemmatizer* lem, std::size_t workers) {
    std::vector<WordSet> video_words(videos.size());
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t v = begin; v < end; ++v) {
            if (videos[v].frames() < clf.window_len) continue;
            auto preds = sliding_window_predict(videos[v], clf);
            video_words[v] = extract_word_set(preds, clf, threshold, lem);
        }
    };
    if (workers <= 1) {
        work(0, videos.size());
    } else {
        std::vector<std::thread> pool;
        std::size_t chunk = (videos.size() + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            std::size_t b = w * chunk, e = std::min(videos.size(), b + chunk);
            if (b < e) pool.emplace_back(work, b, e);
        }
        for (auto& t : pool) t.join();
    }
    SimilarityMatrix sim;
    sim.scores = Tensor2(queries.size(), videos.size());
    for (std::size_t q = 0; q < queries.size(); ++q) {
        WordSet qw = lemmatize_tokens(queries[q].tokens, lem);
        sim.row_ids.push_back(queries[q].text_id);
        for (std::size_t v = 0; v < videos.size(); ++v)
            sim.scores.at(q, v) = iou_similarity(qw, video_words[v]);
    }
    for (const auto& v : videos) sim.col_ids.push_back(v.video_id);
    sim.ground_truth.resize(queries.size());
    for (std::size_t q = 0; q < queries.size(); ++q) sim.ground_truth[q] = q;
    return sim;
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw CLI::ValidationError("--split", "unknown split `" + s + "`");
}

struct SyntheticFlags {
    SyntheticConfig cfg;
    std::string preset = "desk";

    void attach(CLI::App* cmd) {
        cmd->add_option("--preset", preset, "desk (default) or paper scale")
            ->check(CLI::IsMember({"desk", "paper"}));
        cmd->add_option("--seed", cfg.seed, "corpus seed");
        cmd->add_option("--vocab", cfg.vocab_size, "sign vocabulary size [30]");
        cmd->add_option("--train", cfg.n_train, "training videos [300]");
        cmd->add_option("--val", cfg.n_val, "validation videos [60]");
        cmd->add_option("--test", cfg.n_test, "test videos [60]");
        cmd->add_option("--feature-dim", cfg.feature_dim, "video feature dim [64]");
        cmd->add_option("--word-dim", cfg.word_dim, "word embedding dim [16]");
        cmd->add_option("--noise", cfg.noise_sigma, "per-frame noise sigma [0.1]");
        cmd->add_option("--gap", cfg.domain_gap_offset, "lexicon/continuous gap offset [0]");
        cmd->add_flag("--rotation-gap", cfg.rotation_gap, "also rotate continuous features");
        cmd->add_option("--exemplars", cfg.exemplars_per_class, "exemplar clips per class [3]");
        cmd->add_option("--mouthing-recall", cfg.mouthing_recall, "mouthing recall [0.6]");
        cmd->add_option("--mouthing-precision", cfg.mouthing_precision,
                        "mouthing precision [0.9]");
        cmd->add_option("--inflect-rate", cfg.inflect_rate, "subtitle inflection rate [0.3]");
    }

    SyntheticConfig resolve() const {
        SyntheticConfig c = cfg;
        if (preset == "paper") {
            // paper-scale proportions; still synthetic, just bigger
            if (c.vocab_size == 30) c.vocab_size = 100;
            if (c.n_train == 300) c.n_train = 1000;
            if (c.n_val == 60) c.n_val = 200;
            if (c.n_test == 60) c.n_test = 200;
            if (c.feature_dim == 64) c.feature_dim = 256;
            if (c.word_dim == 16) c.word_dim = 64;
        }
        return c;
    }
};

struct CmFlags {
    TrainConfig cfg;
    std::size_t embed_dim = 0, clusters = 0;
    std::string pooling = "average";
    std::string preset = "desk";

    void attach(CLI::App* cmd) {
        cmd->add_option("--preset", preset, "desk (default) or paper scale")
            ->check(CLI::IsMember({"desk", "paper"}));
        cmd->add_option("--epochs", cfg.epochs, "training epochs [40]");
        cmd->add_option("--batch-size", cfg.batch_size, "batch size [16 desk, 128 paper]");
        cmd->add_option("--margin", cfg.margin, "ranking margin [0.2]");
        cmd->add_option("--lr", cfg.optimizer.learning_rate, "radam learning rate [0.001]");
        cmd->add_option("--weight-decay", cfg.optimizer.weight_decay, "weight decay [1e-5]");
        cmd->add_option("--embed-dim", embed_dim, "joint space dim [64 desk, 512 paper]");
        cmd->add_option("--clusters", clusters, "netvlad clusters [4 desk, 20 paper]");
        cmd->add_option("--pooling", pooling, "video pooling: average|max")
            ->check(CLI::IsMember({"average", "max"}));
        cmd->add_option("--seed", cfg.seed, "training seed");
    }

    void resolve(std::size_t* embed, std::size_t* k, TrainConfig* out) const {
        *out = cfg;
        *embed = embed_dim ? embed_dim : (preset == "paper" ? 512 : 64);
        *k = clusters ? clusters : (preset == "paper" ? 20 : 4);
        if (preset == "paper" && cfg.batch_size == 16) out->batch_size = 128;
    }
};

JointEmbeddingModel train_cm_model(const CorpusBundle& bundle,
                                   const std::vector<SubtitleRecord>& subtitles,
                                   const CmFlags& flags, std::ostream* log,
                                   std::vector<EpochRecord>* history_out = nullptr) {
    PairedCorpus train_set = make_paired(bundle, Split::train, subtitles);
    PairedCorpus val_set = make_paired(bundle, Split::val, subtitles);
    std::size_t embed = 0, k = 0;
    TrainConfig cfg;
    flags.resolve(&embed, &k, &cfg);
    Rng rng(cfg.seed);
    JointEmbeddingModel model =
        JointEmbeddingModel::init(bundle.videos[0].dim(), bundle.table.dim(), embed, k,
                                  parse_pooling(flags.pooling), rng, &bundle.table);
    auto history = train(train_set, val_set, bundle.table, model, cfg, log);
    std::size_t best = select_model(history);
    restore_snapshot(model, history[best].snapshot);
    if (history_out) *history_out = std::move(history);
    return model;
}

int cmd_gen_synth(const SyntheticFlags& flags, const std::string& out) {
    SyntheticConfig cfg = flags.resolve();
    CorpusBundle bundle = generate_synthetic(cfg);
    save_bundle(out, bundle);
    ConfigWriter cw;
    cw.add("preset", flags.preset);
    cw.add("seed", cfg.seed);
    cw.add("vocab", cfg.vocab_size);
    cw.add("train", cfg.n_train);
    cw.add("val", cfg.n_val);
    cw.add("test", cfg.n_test);
    cw.add("feature_dim", cfg.feature_dim);
    cw.add("word_dim", cfg.word_dim);
    cw.add("noise", fmt(cfg.noise_sigma));
    cw.add("gap", fmt(cfg.domain_gap_offset));
    cw.add("rotation_gap", cfg.rotation_gap ? 1 : 0);
    cw.add("exemplars", cfg.exemplars_per_class);
    cw.write(out, "gen-synth");
    std::cout << "wrote corpus (" << bundle.videos.size() << " videos, vocab "
              << cfg.vocab_size << ") to " << out << "\n";
    return 0;
}

int cmd_spot(const std::string& corpus_dir, const std::string& out, std::size_t rounds,
             double threshold, double mouthing_threshold, std::size_t window_len,
             std::size_t hidden_dim, bool exemplar_only, std::uint64_t seed) {
    CorpusBundle bundle = load_bundle(corpus_dir);
    auto vocab_list = bundle.gloss_vocab();
    std::set<std::string> vocab(vocab_list.begin(), vocab_list.end());

    SpotAlignConfig cfg;
    cfg.spot.threshold = threshold;
    cfg.window_len = window_len;
    cfg.hidden_dim = hidden_dim;
    cfg.joint_training = !exemplar_only;
    cfg.seed = seed;
    cfg.classifier.seed = seed;

    SpotAlignState state;
    state.mouthing = filter_mouthing(bundle.mouthing, mouthing_threshold, vocab);
    SpotCorpus corpus = make_spot_corpus(bundle, Split::train);

    fs::create_directories(out);
    save_annotations((fs::path(out) / "annotations_M.txt").string(), state.mouthing);
    for (std::size_t r = 1; r <= rounds; ++r) {
        state = spot_align_round(state, corpus, bundle.exemplars, cfg);
        save_annotations((fs::path(out) / ("annotations_D" + std::to_string(r) + ".txt")).string(),
                         state.dictionary.back());
        std::cout << "round D" << r << " yield " << state.yield_history.back() << "\n";
    }
    save_annotations((fs::path(out) / "annotations.txt").string(), state.current_annotations());
    if (rounds > 0)
        save_sr_checkpoint((fs::path(out) / "classifier.bin").string(), state.classifier, seed);

    {
        std::ofstream yout(fs::path(out) / "yield.txt");
        yout << "source count\n";
        yout << "M " << state.mouthing.size() << "\n";
        for (std::size_t r = 0; r < state.yield_history.size(); ++r)
            yout << "D" << (r + 1) << " " << state.yield_history[r] << "\n";
        YieldStats ys = yield_stats(state.current_annotations());
        yout << "current_total " << ys.total << "\n";
        if (rounds > 0) {
            double d = cross_domain_distance(bundle.exemplars, state.current_annotations(),
                                             corpus.videos, state.classifier);
            yout << "cross_domain_distance " << fmt(d) << "\n";
        }
    }
    ConfigWriter cw;
    cw.add("corpus", corpus_dir);
    cw.add("rounds", rounds);
    cw.add("threshold", fmt(threshold));
    cw.add("mouthing_threshold", fmt(mouthing_threshold));
    cw.add("window_len", window_len);
    cw.add("hidden_dim", hidden_dim);
    cw.add("joint_training", exemplar_only ? 0 : 1);
    cw.add("seed", seed);
    cw.write(out, "spot");
    return 0;
}

int cmd_train_sr(const std::string& corpus_dir, const std::string& annotations_path,
                 const std::string& out, std::size_t window_len, std::size_t hidden_dim,
                 const ClassifierTrainConfig& tcfg, std::size_t clips_per_annotation) {
    CorpusBundle bundle = load_bundle(corpus_dir);
    std::vector<SpotAnnotation> annotations = load_annotations(annotations_path);

    std::vector<std::string> class_vocab = bundle.gloss_vocab();
    std::map<std::string, std::size_t> class_index;
    for (std::size_t i = 0; i < class_vocab.size(); ++i) class_index[class_vocab[i]] = i;

    Rng rng(tcfg.seed);
    std::vector<ClipSample> clips;
    for (const auto& [cls, ex_clips] : bundle.exemplars)
        for (const auto& clip : ex_clips) {
            if (clip.frames() < window_len) continue;
            std::size_t start = rng.index(clip.frames() - window_len + 1);
            Tensor2 w(window_len, clip.dim());
            for (std::size_t i = 0; i < window_len; ++i)
                for (std::size_t j = 0; j < clip.dim(); ++j)
                    w.at(i, j) = clip.features.at(start + i, j);
            clips.push_back({std::move(w), class_index.at(cls), Domain::lexicon});
        }
    for (const auto& a : annotations) {
        auto ci = class_index.find(a.sign_class);
        if (ci == class_index.end()) continue;
        const FeatureSequence& video = bundle.video(a.video_id);
        if (video.frames() < window_len) continue;
        FrameRange range = clip_window(a, video.frames());
        for (std::size_t r = 0; r < clips_per_annotation; ++r) {
            // window start clamped so the clip stays inside the video
            std::size_t lo = range.begin;
            std::size_t max_start = video.frames() - window_len;
            lo = std::min(lo, max_start);
            std::size_t hi = range.end + 1 >= window_len
                                 ? std::min(range.end + 1 - window_len, max_start)
                                 : lo;
            if (hi < lo) hi = lo;
            std::size_t start = lo + (hi > lo ? rng.index(hi - lo + 1) : 0);
            Tensor2 w(window_len, video.dim());
            for (std::size_t i = 0; i < window_len; ++i)
                for (std::size_t j = 0; j < video.dim(); ++j)
                    w.at(i, j) = video.features.at(start + i, j);
            clips.push_back({std::move(w), ci->second, Domain::continuous});
        }
    }

    Rng init_rng(tcfg.seed + 1);
    WindowClassifier clf = WindowClassifier::init(window_len, bundle.videos[0].dim(),
                                                  hidden_dim, class_vocab, init_rng);
    double final_loss = train_classifier(clips, clf, tcfg);
    double acc = classifier_accuracy(clips, clf);

    fs::create_directories(out);
    save_sr_checkpoint((fs::path(out) / "classifier.bin").string(), clf, tcfg.seed);
    {
        std::ofstream log(fs::path(out) / "train.log");
        log << "clips " << clips.size() << "\n";
        log << "final_loss " << fmt(final_loss, 6) << "\n";
        log << "train_accuracy " << fmt(acc) << "\n";
    }
    ConfigWriter cw;
    cw.add("corpus", corpus_dir);
    cw.add("annotations", annotations_path);
    cw.add("window_len", window_len);
    cw.add("hidden_dim", hidden_dim);
    cw.add("epochs", tcfg.epochs);
    cw.add("lr", fmt(tcfg.learning_rate, 6));
    cw.add("seed", tcfg.seed);
    cw.write(out, "train-sr");
    std::cout << "trained sr classifier on " << clips.size() << " clips, accuracy "
              << fmt(acc) << "\n";
    return 0;
}

int cmd_train_cm(const std::string& corpus_dir, const std::string& out, const CmFlags& flags) {
    CorpusBundle bundle = load_bundle(corpus_dir);
    fs::create_directories(out);
    std::ofstream log(fs::path(out) / "epochs.log");
    std::vector<EpochRecord> history;
    JointEmbeddingModel model = train_cm_model(bundle, bundle.subtitles, flags, &log, &history);
    std::size_t best = select_model(history);

    save_cm_checkpoint((fs::path(out) / "model.bin").string(), model, flags.cfg.seed);
    write_metrics(fs::path(out) / "val_best.txt", history[best].val_metrics, "val_t2v");
    {
        std::ofstream bout(fs::path(out) / "best.txt");
        bout << "best_epoch " << history[best].epoch << "\n";
        bout << "val_geometric_mean " << fmt(history[best].geometric_mean) << "\n";
    }
    ConfigWriter cw;
    cw.add("corpus", corpus_dir);
    cw.add("preset", flags.preset);
    cw.add("epochs", flags.cfg.epochs);
    cw.add("batch_size", flags.cfg.batch_size);
    cw.add("margin", fmt(flags.cfg.margin));
    cw.add("lr", fmt(flags.cfg.optimizer.learning_rate, 6));
    cw.add("pooling", flags.pooling);
    cw.add("seed", flags.cfg.seed);
    cw.write(out, "train-cm");
    std::cout << "best epoch " << history[best].epoch << " gm "
              << fmt(history[best].geometric_mean) << "\n";
    return 0;
}

int cmd_eval(const std::string& corpus_dir, const std::string& cm_path,
             const std::string& sr_path, const std::string& sim_path, const std::string& split,
             double threshold, const std::string& out, std::size_t workers) {
    fs::create_directories(out);
    SimilarityMatrix sim;
    std::string tag;
    if (!sim_path.empty()) {
        sim = SimilarityMatrix::load(sim_path);
        tag = "sim";
    } else if (!cm_path.empty()) {
        CorpusBundle bundle = load_bundle(corpus_dir);
        JointEmbeddingModel model = load_cm_checkpoint(cm_path);
        PairedCorpus pc = make_paired(bundle, parse_split(split));
        std::vector<Tensor2> vembs, tembs;
        std::vector<std::string> vids, tids;
        for (std::size_t i = 0; i < pc.size(); ++i) {
            vembs.push_back(encode_video(pc.videos[i], model));
            tembs.push_back(encode_text(pc.texts[i], bundle.table, model));
            vids.push_back(pc.videos[i].video_id);
            tids.push_back(pc.texts[i].text_id);
        }
        sim = similarity_matrix(vembs, tembs, vids, tids);
        tag = "cm";
    } else if (!sr_path.empty()) {
        CorpusBundle bundle = load_bundle(corpus_dir);
        WindowClassifier clf = load_sr_checkpoint(sr_path);
        SpotCorpus sc = make_spot_corpus(bundle, parse_split(split));
        sim = sr_similarity_parallel(sc.subtitles, sc.videos, clf, threshold, nullptr, workers);
        tag = "sr";
    } else {
        std::cerr << "eval: one of --sim, --cm-checkpoint, --sr-checkpoint is required\n";
        return 1;
    }
    sim.save((fs::path(out) / (tag + "_similarity.bin")).string());
    eval_both_directions(sim, out, tag);
    Metrics m = evaluate(sim, {1, 5, 10}, Direction::t2v);
    std::cout << tag << " t2v R@1 " << fmt(m.r_at.at(1)) << " R@5 " << fmt(m.r_at.at(5))
              << " R@10 " << fmt(m.r_at.at(10)) << " MedR " << fmt(m.med_r, 2) << "\n";
    ConfigWriter cw;
    cw.add("corpus", corpus_dir);
    cw.add("split", split);
    cw.add("source", tag);
    if (tag == "sr") cw.add("threshold", fmt(threshold));
    cw.write(out, "eval");
    return 0;
}

int cmd_fuse(const std::string& a_path, const std::string& b_path, double wa, double wb,
             bool minmax, const std::string& out) {
    SimilarityMatrix a = SimilarityMatrix::load(a_path);
    SimilarityMatrix b = SimilarityMatrix::load(b_path);
    SimilarityMatrix fused = fuse(a, b, wa, wb, minmax);
    fs::create_directories(out);
    fused.save((fs::path(out) / "fused_similarity.bin").string());
    eval_both_directions(fused, out, "fused");
    Metrics m = evaluate(fused, {1, 5, 10}, Direction::t2v);
    std::cout << "fused t2v R@1 " << fmt(m.r_at.at(1)) << " MedR " << fmt(m.med_r, 2) << "\n";
    ConfigWriter cw;
    cw.add("a", a_path);
    cw.add("b", b_path);
    cw.add("wa", fmt(wa));
    cw.add("wb", fmt(wb));
    cw.add("minmax", minmax ? 1 : 0);
    cw.write(out, "fuse");
    return 0;
}

int cmd_sweep_threshold(const std::string& corpus_dir, const std::string& sr_path,
                        const std::string& split, const std::string& out,
                        std::size_t workers) {
    CorpusBundle bundle = load_bundle(corpus_dir);
    WindowClassifier clf = load_sr_checkpoint(sr_path);
    SpotCorpus sc = make_spot_corpus(bundle, parse_split(split));
    fs::create_directories(out);
    std::ofstream table(fs::path(out) / "sweep.txt");
    table << "threshold R@1 R@5 R@10 MedR\n";
    for (double th : {0.0, 0.1, 0.25, 0.5, 0.75}) {
        SimilarityMatrix sim =
            sr_similarity_parallel(sc.subtitles, sc.videos, clf, th, nullptr, workers);
        Metrics m = evaluate(sim, {1, 5, 10}, Direction::t2v);
        table << fmt(th, 2) << " " << fmt(m.r_at.at(1)) << " " << fmt(m.r_at.at(5)) << " "
              << fmt(m.r_at.at(10)) << " " << fmt(m.med_r, 2) << "\n";
        std::cout << "threshold " << fmt(th, 2) << " R@1 " << fmt(m.r_at.at(1)) << "\n";
    }
    ConfigWriter cw;
    cw.add("corpus", corpus_dir);
    cw.add("checkpoint", sr_path);
    cw.add("split", split);
    cw.write(out, "sweep-threshold");
    return 0;
}

int cmd_ablate_alignment(const std::string& corpus_dir, const std::string& out,
                         double shift_mean, double shift_sigma, const CmFlags& flags) {
    CorpusBundle bundle = load_bundle(corpus_dir);
    fs::create_directories(out);

    if (shift_mean <= 0) {
        // default: one average sign duration
        double lo = 16, hi = 24;  // generator default frames_per_sign
        shift_mean = (lo + hi) / 2.0;
    }
    std::vector<SubtitleRecord> shifted =
        perturb_alignment(bundle.subtitles, bundle, shift_mean, shift_sigma, flags.cfg.seed);

    std::ofstream log_clean(fs::path(out) / "epochs_aligned.log");
    JointEmbeddingModel clean = train_cm_model(bundle, bundle.subtitles, flags, &log_clean);
    std::ofstream log_shift(fs::path(out) / "epochs_shifted.log");
    JointEmbeddingModel noisy = train_cm_model(bundle, shifted, flags, &log_shift);

    // each variant is scored with its own alignment: the shifted pipeline sees
    // shifted windows end to end, mirroring a fully speech-aligned system
    auto test_metrics = [&](const JointEmbeddingModel& model,
                            const std::vector<SubtitleRecord>& subs) {
        PairedCorpus pc = make_paired(bundle, Split::test, subs);
        return evaluate_model(pc, bundle.table, model, {1, 5, 10});
    };
    Metrics m_clean = test_metrics(clean, bundle.subtitles);
    Metrics m_shift = test_metrics(noisy, shifted);
    write_metrics(fs::path(out) / "aligned_t2v.txt", m_clean, "aligned_t2v");
    write_metrics(fs::path(out) / "shifted_t2v.txt", m_shift, "shifted_t2v");
    double drop = m_clean.r_at.at(1) > 0
                      ? 100.0 * (m_clean.r_at.at(1) - m_shift.r_at.at(1)) / m_clean.r_at.at(1)
                      : 0.0;
    {
        std::ofstream rout(fs::path(out) / "ablation.txt");
        rout << "aligned_R@1 " << fmt(m_clean.r_at.at(1)) << "\n";
        rout << "shifted_R@1 " << fmt(m_shift.r_at.at(1)) << "\n";
        rout << "relative_drop_pct " << fmt(drop, 2) << "\n";
    }
    std::cout << "aligned R@1 " << fmt(m_clean.r_at.at(1)) << ", shifted R@1 "
              << fmt(m_shift.r_at.at(1)) << ", relative drop " << fmt(drop, 2) << "%\n";
    ConfigWriter cw;
    cw.add("corpus", corpus_dir);
    cw.add("shift_mean", fmt(shift_mean, 2));
    cw.add("shift_sigma", fmt(shift_sigma, 2));
    cw.add("seed", flags.cfg.seed);
    cw.write(out, "ablate-alignment");
    return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out) {
    std::vector<std::map<std::string, std::string>> rows;
    std::set<std::string> keys;
    for (const auto& path : inputs) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open metrics file: " + path);
        std::map<std::string, std::string> row;
        std::string key, value;
        while (in >> key >> value) {
            row[key] = value;
            if (key != "task") keys.insert(key);
        }
        if (!row.count("task")) row["task"] = fs::path(path).stem().string();
        rows.push_back(std::move(row));
    }
    std::ostringstream table;
    table << "task";
    for (const auto& k : keys) table << " " << k;
    table << "\n";
    for (const auto& row : rows) {
        table << row.at("task");
        for (const auto& k : keys) {
            auto it = row.find(k);
            table << " " << (it == row.end() ? "-" : it->second);
        }
        table << "\n";
    }
    if (out.empty() || out == "-") {
        std::cout << table.str();
    } else {
        fs::create_directories(fs::path(out).parent_path().empty()
                                   ? fs::path(".")
                                   : fs::path(out).parent_path());
        std::ofstream fout(out);
        fout << table.str();
        std::cout << table.str();
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sign-language video retrieval pipeline"};
    app.require_subcommand(1);
    std::size_t workers = 1;
    app.add_option("--workers", workers, "worker threads for parallelizable loops [1]")
        ->check(CLI::PositiveNumber);

    // gen-synth
    SyntheticFlags gen_flags;
    std::string gen_out = "run/corpus";
    auto* gen = app.add_subcommand("gen-synth", "generate a synthetic corpus");
    gen_flags.attach(gen);
    gen->add_option("--out", gen_out, "output corpus directory");

    // spot
    std::string spot_corpus, spot_out = "run/spot";
    std::size_t spot_rounds = 2, spot_window = 16, spot_hidden = 32;
    double spot_threshold = 0.75, mouthing_threshold = 0.5;
    bool exemplar_only = false;
    std::uint64_t spot_seed = 0;
    auto* spot = app.add_subcommand("spot", "mouthing filter + dictionary spotting rounds");
    spot->add_option("--corpus", spot_corpus, "corpus directory")->required();
    spot->add_option("--out", spot_out, "output run directory");
    spot->add_option("--rounds", spot_rounds, "dictionary spotting rounds [2]");
    spot->add_option("--threshold", spot_threshold, "dictionary spotting threshold [0.75]");
    spot->add_option("--mouthing-threshold", mouthing_threshold, "mouthing filter [0.5]");
    spot->add_option("--window-len", spot_window, "classifier window length [16]");
    spot->add_option("--hidden-dim", spot_hidden, "classifier hidden dim [32]");
    spot->add_flag("--exemplar-only", exemplar_only, "skip joint training (degraded mode)");
    spot->add_option("--seed", spot_seed, "seed");

    // train-sr
    std::string sr_corpus, sr_annotations, sr_out = "run/sr";
    std::size_t sr_window = 16, sr_hidden = 32, sr_clips = 1;
    ClassifierTrainConfig sr_cfg;
    auto* trainsr = app.add_subcommand("train-sr", "train the sign recognition classifier");
    trainsr->add_option("--corpus", sr_corpus, "corpus directory")->required();
    trainsr->add_option("--annotations", sr_annotations, "annotation file")->required();
    trainsr->add_option("--out", sr_out, "output run directory");
    trainsr->add_option("--window-len", sr_window, "window length [16]");
    trainsr->add_option("--hidden-dim", sr_hidden, "hidden dim [32]");
    trainsr->add_option("--epochs", sr_cfg.epochs, "epochs [25]");
    trainsr->add_option("--lr", sr_cfg.learning_rate, "learning rate [0.01]");
    trainsr->add_option("--decay-epoch", sr_cfg.decay_epoch, "lr decay epoch [20]");
    trainsr->add_option("--batch-size", sr_cfg.batch_size, "batch size [8]");
    trainsr->add_option("--clips-per-annotation", sr_clips, "clips per annotation [1]");
    trainsr->add_option("--seed", sr_cfg.seed, "seed");

    // train-cm
    std::string cm_corpus, cm_out = "run/cm";
    CmFlags cm_flags;
    auto* traincm = app.add_subcommand("train-cm", "train the joint embedding");
    traincm->add_option("--corpus", cm_corpus, "corpus directory")->required();
    traincm->add_option("--out", cm_out, "output run directory");
    cm_flags.attach(traincm);

    // eval
    std::string ev_corpus, ev_cm, ev_sr, ev_sim, ev_split = "test", ev_out = "run/eval";
    double ev_threshold = 0.5;
    auto* ev = app.add_subcommand("eval", "metrics from a checkpoint or similarity file");
    ev->add_option("--corpus", ev_corpus, "corpus directory (checkpoint evaluation)");
    ev->add_option("--cm-checkpoint", ev_cm, "joint embedding checkpoint");
    ev->add_option("--sr-checkpoint", ev_sr, "classifier checkpoint");
    ev->add_option("--sim", ev_sim, "similarity file to evaluate directly");
    ev->add_option("--split", ev_split, "train|val|test [test]");
    ev->add_option("--threshold", ev_threshold, "sr word-set threshold [0.5]");
    ev->add_option("--out", ev_out, "output run directory");

    // fuse
    std::string fu_a, fu_b, fu_out = "run/fuse";
    double fu_wa = 0.5, fu_wb = 0.5;
    bool fu_minmax = false;
    auto* fu = app.add_subcommand("fuse", "combine two similarity files");
    fu->add_option("--a", fu_a, "first similarity file")->required();
    fu->add_option("--b", fu_b, "second similarity file")->required();
    fu->add_option("--wa", fu_wa, "weight of the first input [0.5]");
    fu->add_option("--wb", fu_wb, "weight of the second input [0.5]");
    fu->add_flag("--minmax", fu_minmax, "per-query min-max normalization before mixing");
    fu->add_option("--out", fu_out, "output run directory");

    // sweep-threshold
    std::string sw_corpus, sw_ckpt, sw_split = "test", sw_out = "run/sweep";
    auto* sw = app.add_subcommand("sweep-threshold",
                                  "sr metrics over thresholds {0, 0.1, 0.25, 0.5, 0.75}");
    sw->add_option("--corpus", sw_corpus, "corpus directory")->required();
    sw->add_option("--sr-checkpoint", sw_ckpt, "classifier checkpoint")->required();
    sw->add_option("--split", sw_split, "train|val|test [test]");
    sw->add_option("--out", sw_out, "output run directory");

    // ablate-alignment
    std::string ab_corpus, ab_out = "run/ablate";
    double ab_shift_mean = 0.0, ab_shift_sigma = 4.0;
    CmFlags ab_flags;
    auto* ab = app.add_subcommand("ablate-alignment",
                                  "train with aligned vs shifted subtitles and compare");
    ab->add_option("--corpus", ab_corpus, "corpus directory")->required();
    ab->add_option("--out", ab_out, "output run directory");
    ab->add_option("--shift-mean", ab_shift_mean,
                   "mean subtitle shift in frames [one average sign duration]");
    ab->add_option("--shift-sigma", ab_shift_sigma, "shift standard deviation [4]");
    ab_flags.attach(ab);

    // report
    std::vector<std::string> rp_inputs;
    std::string rp_out;
    auto* rp = app.add_subcommand("report", "merge metrics files into one table");
    rp->add_option("--metrics", rp_inputs, "metrics files to merge")->required();
    rp->add_option("--out", rp_out, "output file (default: stdout)");

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_synth(gen_flags, gen_out);
        if (spot->parsed())
            return cmd_spot(spot_corpus, spot_out, spot_rounds, spot_threshold,
                            mouthing_threshold, spot_window, spot_hidden, exemplar_only,
                            spot_seed);
        if (trainsr->parsed())
            return cmd_train_sr(sr_corpus, sr_annotations, sr_out, sr_window, sr_hidden,
                                sr_cfg, sr_clips);
        if (traincm->parsed()) return cmd_train_cm(cm_corpus, cm_out, cm_flags);
        if (ev->parsed())
            return cmd_eval(ev_corpus, ev_cm, ev_sr, ev_sim, ev_split, ev_threshold, ev_out,
                            workers);
        if (fu->parsed()) return cmd_fuse(fu_a, fu_b, fu_wa, fu_wb, fu_minmax, fu_out);
        if (sw->parsed())
            return cmd_sweep_threshold(sw_corpus, sw_ckpt, sw_split, sw_out, workers);
        if (ab->parsed())
            return cmd_ablate_alignment(ab_corpus, ab_out, ab_shift_mean, ab_shift_sigma,
                                        ab_flags);
        if (rp->parsed()) return cmd_report(rp_inputs, rp_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "no subcommand given\n";
    return 1;
}
