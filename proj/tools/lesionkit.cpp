#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lk/checkpoint.hpp"
#include "lk/ensemble.hpp"
#include "lk/manifest.hpp"
#include "lk/metrics.hpp"
#include "lk/screen.hpp"
#include "lk/synthetic.hpp"
#include "lk/train.hpp"

using namespace lk;

namespace {

std::vector<LoadedCheckpoint> load_fleet(const std::vector<std::string>& paths) {
    std::vector<LoadedCheckpoint> fleet;
    for (const std::string& p : paths) fleet.push_back(load_checkpoint(p));
    return fleet;
}

void write_class_csv(const std::string& path, const std::vector<std::string>& ids,
                     const std::vector<std::vector<double>>& rows) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::invalid_argument("predict: cannot write '" + path + "'");
    f << "image_id,melanoma_prob,sk_prob\n";
    char line[96];
    for (size_t i = 0; i < ids.size(); ++i) {
        std::snprintf(line, sizeof line, ",%.17g,%.17g\n", rows[i][0],
                      rows[i].size() > 1 ? rows[i][1] : 0.0);
        f << ids[i] << line;
    }
}

int run_train(const std::string& task, const TrainConfig& cfg_in,
              const std::string& manifest_path, const std::string& folds_file, bool folds_given) {
    TrainConfig cfg = cfg_in;
    cfg.task = task;

    std::vector<ManifestEntry> manifest = load_manifest(manifest_path);
    FoldAssignment fa;
    if (folds_file.empty()) {
        fa = assign_folds(manifest, cfg.folds, task == "classification", cfg.seed);
    } else {
        fa = load_fold_assignment(folds_file);
        if (!folds_given) cfg.folds = fa.k;
    }

    std::filesystem::create_directories(cfg.out_dir);
    save_train_config(cfg.out_dir + "/config.json", cfg);
    save_fold_assignment(cfg.out_dir + "/folds.json", fa);

    CrossValReport rep = train_all_folds(cfg, manifest, fa);
    std::cout << rep.table;

    nlohmann::json jr;
    jr["task"] = cfg.task;
    jr["eval_resolution"] = cfg.input_size;  // validation metric is computed at model input size
    jr["mean_best"] = rep.mean_best;
    jr["failed"] = rep.failed;
    nlohmann::json folds = nlohmann::json::array();
    for (const FoldResult& fr : rep.folds) {
        nlohmann::json jf;
        jf["fold"] = fr.fold;
        if (fr.error.empty()) {
            jf["best_metric"] = fr.best_metric;
            jf["best_epoch"] = fr.best_epoch;
            jf["checkpoint"] = fr.checkpoint_path;
        } else {
            jf["error"] = fr.error;
        }
        folds.push_back(jf);
    }
    jr["folds"] = folds;
    std::ofstream jf(cfg.out_dir + "/cv_report.json", std::ios::trunc);
    jf << jr.dump(2) << "\n";

    if (rep.failed > 0) {
        std::cerr << rep.failed << " of " << cfg.folds << " folds failed\n";
        for (const FoldResult& fr : rep.folds)
            if (!fr.error.empty()) std::cerr << "fold " << fr.fold << ": " << fr.error << "\n";
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"skin lesion toolkit: synthetic corpora, leak screening, cross-validated "
                 "training, ensembling"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus plus manifest.json");
    std::string s_out, s_task = "segmentation";
    int s_n = 200, s_size = 64, s_classes = 3;
    uint64_t s_seed = 1;
    double s_bright = 0.0, s_gauze = 0.0;
    synth->add_option("--out-dir", s_out, "directory for images and manifest")->required();
    synth->add_option("--task", s_task, "segmentation or classification")
        ->check(CLI::IsMember({"segmentation", "classification"}));
    synth->add_option("--n", s_n, "item count");
    synth->add_option("--size", s_size, "square image size");
    synth->add_option("--classes", s_classes, "class count (classification)");
    synth->add_option("--seed", s_seed, "generator seed");
    synth->add_option("--bright-leak", s_bright, "fraction of class 1 given bright edges");
    synth->add_option("--gauze-leak", s_gauze, "fraction of class 2 given a gauze border");

    // folds
    auto* folds = app.add_subcommand("folds", "assign manifest groups to cross-validation folds");
    std::string f_manifest, f_out;
    int f_k = 10;
    bool f_strat = false;
    uint64_t f_seed = 1;
    folds->add_option("--manifest", f_manifest, "manifest.json path")->required();
    folds->add_option("--folds,-k", f_k, "fold count");
    folds->add_flag("--stratify", f_strat, "balance labels across folds");
    folds->add_option("--seed", f_seed, "shuffle seed");
    folds->add_option("--out", f_out, "output path (default folds.json beside the manifest)");

    // screen
    auto* screen = app.add_subcommand("screen", "detect acquisition artifacts that leak labels");
    std::string sc_manifest, sc_out;
    ScreenConfig sc_cfg;
    screen->add_option("--manifest", sc_manifest, "manifest.json path")->required();
    screen->add_option("--out", sc_out, "report CSV path (default screen_report.csv beside it)");
    screen->add_option("--strip-frac", sc_cfg.strip_frac, "edge strip width fraction");
    screen->add_option("--luma-thresh", sc_cfg.luma_thresh, "8-bit overexposure level");
    screen->add_option("--strip-trigger", sc_cfg.strip_trigger, "bright fraction per strip");
    screen->add_option("--border-frac", sc_cfg.border_frac, "border band width fraction");
    screen->add_option("--saturation-cut", sc_cfg.saturation_cut, "saturation floor");
    screen->add_option("--hue-share-cut", sc_cfg.hue_share_cut, "dominant hue bin share");
    screen->add_option("--gauze-threshold", sc_cfg.gauze_threshold, "gauze score flag level");

    // train-seg / train-cls
    std::string t_config, t_manifest, t_folds_file, t_out_dir;
    uint64_t t_seed = 0;
    int t_folds = 0;
    auto add_train_opts = [&](CLI::App* sub) {
        sub->add_option("--manifest", t_manifest, "manifest.json path")->required();
        sub->add_option("--config", t_config, "TrainConfig JSON file");
        sub->add_option("--folds-file", t_folds_file, "precomputed fold assignment JSON");
        sub->add_option("--seed", t_seed, "override config seed");
        sub->add_option("--out-dir", t_out_dir, "override config out_dir");
        sub->add_option("--folds", t_folds, "override config fold count");
    };
    auto* train_seg = app.add_subcommand("train-seg", "cross-validated segmentation training");
    add_train_opts(train_seg);
    auto* train_cls = app.add_subcommand("train-cls", "cross-validated classification training");
    add_train_opts(train_cls);

    // eval
    auto* eval = app.add_subcommand("eval", "score a checkpoint fleet against labeled data");
    std::string e_manifest;
    std::vector<std::string> e_ckpts;
    eval->add_option("--manifest", e_manifest, "manifest.json with ground truth")->required();
    eval->add_option("--checkpoint", e_ckpts, "checkpoint file (repeatable)")->required();

    // predict
    auto* predict = app.add_subcommand("predict", "write ensembled predictions for a manifest");
    std::string p_manifest, p_out;
    std::vector<std::string> p_ckpts;
    predict->add_option("--manifest", p_manifest, "manifest.json of inputs")->required();
    predict->add_option("--checkpoint", p_ckpts, "checkpoint file (repeatable)")->required();
    predict->add_option("--out-dir", p_out, "output directory")->required();

    // ensemble
    auto* ensemble =
        app.add_subcommand("ensemble", "combine one best checkpoint per fold from a run");
    std::string n_run, n_manifest, n_out;
    int n_folds = 0;
    ensemble->add_option("--run-dir", n_run, "train output directory")->required();
    ensemble->add_option("--manifest", n_manifest, "manifest.json of inputs")->required();
    ensemble->add_option("--out-dir", n_out, "output directory")->required();
    ensemble->add_option("--folds", n_folds, "fold count (default: run config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (app.got_subcommand(synth)) {
            SynthOptions so;
            so.n_items = s_n;
            so.size = s_size;
            so.task = s_task == "segmentation" ? SynthTask::segmentation
                                               : SynthTask::classification;
            so.num_classes = s_classes;
            so.seed = s_seed;
            so.bright_leak_frac = s_bright;
            so.gauze_leak_frac = s_gauze;
            std::vector<ManifestEntry> m = write_synthetic_dataset(so, s_out);
            std::cout << "wrote " << m.size() << " items under " << s_out << "\n";
        } else if (app.got_subcommand(folds)) {
            std::vector<ManifestEntry> m = load_manifest(f_manifest);
            FoldAssignment fa = assign_folds(m, f_k, f_strat, f_seed);
            if (f_out.empty())
                f_out = (std::filesystem::path(f_manifest).parent_path() / "folds.json").string();
            save_fold_assignment(f_out, fa);
            std::vector<int> sizes(size_t(fa.k), 0);
            for (const auto& [g, fold] : fa.group_to_fold) ++sizes[size_t(fold)];
            std::cout << fa.k << " folds over " << fa.group_to_fold.size() << " groups:";
            for (int s : sizes) std::cout << " " << s;
            std::cout << "\nwrote " << f_out << "\n";
        } else if (app.got_subcommand(screen)) {
            std::vector<ManifestEntry> m = load_manifest(sc_manifest);
            ScreenOutcome oc = screen_dataset(m, sc_cfg);
            if (sc_out.empty())
                sc_out = (std::filesystem::path(sc_manifest).parent_path() / "screen_report.csv")
                             .string();
            save_reports(sc_out, oc.reports);
            const ScreenSummary& s = oc.summary;
            std::cout << s.total << " items: " << s.bright_flagged << " bright-edge, "
                      << s.gauze_flagged << " gauze-border\n";
            for (const auto& [label, count] : s.bright_by_label)
                std::cout << "  bright flagged label " << label << ": " << count << "\n";
            for (const auto& [label, count] : s.gauze_by_label)
                std::cout << "  gauze flagged label " << label << ": " << count << "\n";
            std::cout << "wrote " << sc_out << "\n";
        } else if (app.got_subcommand(train_seg) || app.got_subcommand(train_cls)) {
            bool is_seg = app.got_subcommand(train_seg);
            CLI::App* sub = is_seg ? train_seg : train_cls;
            TrainConfig cfg;
            if (!t_config.empty()) cfg = load_train_config(t_config);
            if (sub->count("--seed")) cfg.seed = t_seed;
            if (sub->count("--out-dir")) cfg.out_dir = t_out_dir;
            if (sub->count("--folds")) cfg.folds = t_folds;
            return run_train(is_seg ? "segmentation" : "classification", cfg, t_manifest,
                             t_folds_file, sub->count("--folds") > 0);
        } else if (app.got_subcommand(eval)) {
            std::vector<LoadedCheckpoint> fleet = load_fleet(e_ckpts);
            std::vector<ManifestEntry> m = load_manifest(e_manifest);
            if (fleet.at(0).model.arch == "unet") {
                int S = unet_config_from_json(fleet[0].model.config_json).input_size;
                std::vector<Raster> imgs;
                std::vector<MaskRaster> truth;
                for (const auto& e : m) {
                    if (e.is_derived) continue;
                    if (e.mask_path.empty())
                        throw std::invalid_argument("eval: item '" + e.item_id + "' has no mask");
                    imgs.push_back(read_png(e.image_path));
                    truth.push_back(resize_mask_nearest(read_mask_png(e.mask_path), S, S));
                }
                if (imgs.empty()) throw std::invalid_argument("eval: no original items");
                std::vector<ProbMap> maps = predict_segmentation(fleet, imgs);
                double total = 0.0;
                for (size_t i = 0; i < maps.size(); ++i)
                    total += jaccard(binarize(maps[i], 0.5), truth[i]);
                std::cout << "jaccard " << total / double(maps.size()) << " over " << maps.size()
                          << " items\n";
            } else {
                std::vector<Raster> imgs;
                std::vector<int> melanoma;
                for (const auto& e : m) {
                    if (e.is_derived) continue;
                    if (e.label < 0)
                        throw std::invalid_argument("eval: item '" + e.item_id + "' has no label");
                    imgs.push_back(read_png(e.image_path));
                    melanoma.push_back(e.label == 0 ? 1 : 0);
                }
                if (imgs.empty()) throw std::invalid_argument("eval: no original items");
                std::vector<std::vector<double>> rows = predict_classification(fleet, imgs);
                std::vector<double> scores;
                for (const auto& r : rows) scores.push_back(r[0]);
                std::cout << "melanoma auc " << roc_auc(scores, melanoma) << " over "
                          << imgs.size() << " items\n";
            }
        } else if (app.got_subcommand(predict)) {
            std::vector<LoadedCheckpoint> fleet = load_fleet(p_ckpts);
            std::vector<ManifestEntry> m = load_manifest(p_manifest);
            std::filesystem::create_directories(p_out);
            std::vector<std::string> ids;
            std::vector<Raster> imgs;
            for (const auto& e : m) {
                if (e.is_derived) continue;
                ids.push_back(e.item_id);
                imgs.push_back(read_png(e.image_path));
            }
            if (imgs.empty()) throw std::invalid_argument("predict: no original items");
            if (fleet.at(0).model.arch == "unet") {
                std::vector<ProbMap> maps = predict_segmentation(fleet, imgs);
                for (size_t i = 0; i < maps.size(); ++i)
                    write_mask_png(p_out + "/" + ids[i] + "_segmentation.png",
                                   binarize(maps[i], 0.5));
                std::cout << "wrote " << maps.size() << " masks under " << p_out << "\n";
            } else {
                std::vector<std::vector<double>> rows = predict_classification(fleet, imgs);
                write_class_csv(p_out + "/predictions.csv", ids, rows);
                std::cout << "wrote " << p_out << "/predictions.csv (" << rows.size()
                          << " rows)\n";
            }
        } else if (app.got_subcommand(ensemble)) {
            int k = n_folds;
            if (k <= 0) {
                TrainConfig rc = load_train_config(n_run + "/config.json");
                k = rc.folds;
            }
            std::vector<int> expected;
            std::vector<LoadedCheckpoint> per_fold;
            for (int i = 0; i < k; ++i) {
                std::string path = n_run + "/fold_" + std::to_string(i) + "_best.ckpt";
                if (!std::filesystem::exists(path))
                    throw std::invalid_argument("ensemble: missing checkpoint for fold " +
                                                std::to_string(i) + " ('" + path + "')");
                per_fold.push_back(load_checkpoint(path));
                expected.push_back(i);
            }
            std::vector<ManifestEntry> m = load_manifest(n_manifest);
            std::filesystem::create_directories(n_out);
            std::vector<std::string> ids;
            std::vector<Raster> imgs;
            for (const auto& e : m) {
                if (e.is_derived) continue;
                ids.push_back(e.item_id);
                imgs.push_back(read_png(e.image_path));
            }
            if (imgs.empty()) throw std::invalid_argument("ensemble: no original items");
            if (per_fold.at(0).model.arch == "unet") {
                std::vector<std::vector<ProbMap>> by_fold;
                for (int i = 0; i < k; ++i) {
                    std::vector<LoadedCheckpoint> single;
                    single.push_back(std::move(per_fold[size_t(i)]));
                    by_fold.push_back(predict_segmentation(single, imgs));
                    per_fold[size_t(i)] = std::move(single[0]);
                }
                for (size_t j = 0; j < imgs.size(); ++j) {
                    std::map<int, ProbMap> fold_maps;
                    for (int i = 0; i < k; ++i) fold_maps[i] = by_fold[size_t(i)][j];
                    SegmentationResult res = finalize_segmentation(fold_maps, expected, 0.5);
                    write_mask_png(n_out + "/" + ids[j] + "_segmentation.png", res.mask);
                }
                std::cout << "wrote " << imgs.size() << " masks under " << n_out << "\n";
            } else {
                std::vector<std::vector<double>> rows = predict_classification(per_fold, imgs);
                write_class_csv(n_out + "/predictions.csv", ids, rows);
                std::cout << "wrote " << n_out << "/predictions.csv (" << rows.size()
                          << " rows)\n";
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
