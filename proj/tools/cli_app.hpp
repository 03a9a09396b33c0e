#pragma once

#include "dscope/dscope.hpp"
#include "dscope/synthetic.hpp"

#include "CLI11.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace dscope::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitInternal = 3;

struct Globals {
    std::uint64_t seed = 42;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    bool verbose = false;
    bool version = false;
    bool json = false;
};

struct Context {
    Globals g;
    std::string subcommand;
    std::string config_hash;
    std::ostream& out;
    std::ostream& err;
};

namespace detail {

inline const char* kOutputs = "Outputs";

/// Hash of every effective option of the chosen subcommand plus the seed. Output paths,
/// thread count and verbosity are excluded since they never change output content.
inline std::string config_hash(const CLI::App& app, const CLI::App& sub, std::uint64_t seed) {
    std::string canon = std::string(sub.get_name()) + "\nseed=" + std::to_string(seed) + "\n";
    for (const CLI::Option* opt : sub.get_options()) {
        if (opt->get_group() == kOutputs || opt->get_name() == "--help") continue;
        std::string value;
        if (opt->count() > 0) {
            for (const auto& r : opt->results()) value += r + ";";
        } else {
            value = opt->get_default_str();
        }
        canon += opt->get_name() + "=" + value + "\n";
    }
    (void)app;
    return hex64(fnv1a64(canon));
}

inline void write_provenance(const Context& ctx, const std::string& file) {
    nlohmann::ordered_json j;
    j["tool"] = "dscope";
    j["version"] = std::string(kVersion);
    j["subcommand"] = ctx.subcommand;
    j["config_hash"] = ctx.config_hash;
    j["seed"] = ctx.g.seed;
    write_text_file(file + ".provenance.json", j.dump(2) + "\n");
}

inline void require_file(const std::string& path, const std::string& what) {
    if (path.empty()) throw UsageError(what + " path is required");
    if (!std::filesystem::is_regular_file(path)) throw UsageError(what + " '" + path + "' does not exist");
}

inline void require_writable_dir_of(const std::string& path) {
    if (path.empty()) throw UsageError("output path is required");
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty() && !std::filesystem::is_directory(parent)) {
        throw UsageError("output directory '" + parent.string() + "' does not exist");
    }
}

struct TrainingData {
    LabeledDataset ds;
    Matrix X;
    Labels y;
};

inline TrainingData load_training(const std::string& dataset, const std::string& embeddings) {
    TrainingData t;
    t.ds = load_labeled_dataset(dataset);
    if (!t.ds.is_canonical()) throw DataError("dataset '" + dataset + "' has non-canonical labels; run ingest with merge rules first");
    t.y = t.ds.labels();
    t.X = read_store_matrix(embeddings);
    if (static_cast<std::size_t>(t.X.rows()) != t.ds.size()) {
        throw DataError("embeddings '" + embeddings + "' hold " + std::to_string(t.X.rows()) + " rows but dataset has " +
                        std::to_string(t.ds.size()) + " samples");
    }
    return t;
}

inline ClassifierSpec resolve_spec(const std::string& spec_file, const std::string& family) {
    if (!spec_file.empty()) {
        std::ifstream in(spec_file);
        if (!in) throw UsageError("cannot open spec '" + spec_file + "'");
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError("spec '" + spec_file + "' is malformed: " + e.what());
        }
        return spec_from_json(j);
    }
    return default_spec(parse_family(family));
}

inline std::optional<Date> optional_date(const std::string& s) {
    if (s.empty()) return std::nullopt;
    try {
        return parse_date(s);
    } catch (const DataError& e) {
        throw UsageError(e.what());
    }
}

struct TuneOutcome {
    BayesResult result;
    ClassifierSpec best;
};

inline TuneOutcome run_tune(const Context& ctx, const TrainingData& t, Family family, int iterations, int initial, int folds) {
    const FoldAssignment fa = stratified_kfold(t.ds, folds, ctx.g.seed);
    BayesOptions bo;
    bo.n_iterations = iterations;
    bo.n_initial = initial;
    bo.seed = ctx.g.seed;
    if (ctx.g.verbose) {
        bo.on_trial = [&](const Trial& tr) {
            ctx.err << "trial " << tr.iteration << " value=" << format_fixed6(tr.value) << " theta=" << theta_to_json(tr.theta).dump()
                    << (tr.failed ? " FAILED: " + tr.error : "") << "\n";
        };
    }
    const Objective obj = make_cv_objective(family, t.X, t.y, fa, ctx.g.threads);
    TuneOutcome o{bayes_optimize(obj, default_search_space(family), bo), {}};
    o.best = theta_to_spec(family, o.result.best.theta);
    return o;
}

inline void write_predictions_csv(const std::vector<RowPrediction>& preds, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << "row,label,confidence\n";
    for (const auto& p : preds) {
        out << p.row << ',' << category_name(category_from_index(p.label)) << ',' << format_fixed6(p.confidence) << '\n';
    }
    if (!out) throw DataError("write failure on '" + path + "'");
}

inline std::vector<RowPrediction> read_predictions_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open predictions '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "row,label,confidence") throw DataError("predictions '" + path + "' has a bad header");
    std::vector<RowPrediction> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto a = line.find(','), b = line.rfind(',');
        if (a == std::string::npos || a == b) throw DataError("predictions line " + std::to_string(lineno) + ": expected 3 fields");
        RowPrediction p;
        try {
            p.row = std::stoull(line.substr(0, a));
            p.confidence = std::stod(line.substr(b + 1));
        } catch (const std::logic_error&) {
            throw DataError("predictions line " + std::to_string(lineno) + ": bad number");
        }
        const auto cat = parse_category(line.substr(a + 1, b - a - 1), true);
        if (!cat) throw DataError("predictions line " + std::to_string(lineno) + ": unknown label");
        p.label = category_index(*cat);
        out.push_back(p);
    }
    return out;
}

inline void emit_series(const Context& ctx, const TimelineSeries& s, ReportFormat fmt, const std::string& path) {
    emit_report(s, fmt, path);
    write_provenance(ctx, path);
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Discourse classification over sentence embeddings: tune, train, evaluate and run daily surveillance.", "dscope"};
    Globals g;
    app.add_option("--seed", g.seed, "Seed for folds, optimizer and synthetic data")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads for parallel-safe stages")->capture_default_str();
    app.add_flag("-v,--verbose", g.verbose, "Per-trial and per-stage logging on stderr");
    app.add_flag("--version", g.version, "Print version and exit");
    app.add_flag("--json", g.json, "With --version: machine-readable output");
    app.set_config("--config", "", "Config file (key=value, [subcommand] sections); flags override it");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(0, 1);

    // ingest
    std::string in_path, out_path, rules_path, summary_path;
    bool intent_rules = false;
    auto* ingest = app.add_subcommand("ingest", "Normalize a labeled JSONL corpus and apply category merge rules");
    ingest->add_option("--input", in_path, "Labeled JSONL corpus")->required();
    ingest->add_option("--output", out_path, "Canonical JSONL output")->required()->group(detail::kOutputs);
    ingest->add_option("--rules", rules_path, "Merge rules JSON: [{sources:[..], target|action}]");
    ingest->add_flag("--intent-rules", intent_rules, "Use the built-in intent-dataset merge rules");

    // mock-embed
    std::string me_input, me_output, me_dataset_out, me_start = "2020-01-26", me_end = "2020-04-05";
    std::size_t me_dim = kLabseDim, me_syn_labeled = 0, me_syn_tweets = 0;
    double me_noise = 0.3;
    auto* membed = app.add_subcommand("mock-embed", "Deterministic stand-in encoder and synthetic fixtures");
    membed->add_option("--input", me_input, "Labeled JSONL corpus or tweet JSONL {record_id, date, text}");
    membed->add_option("--output", me_output, "Embedding store to write")->required()->group(detail::kOutputs);
    membed->add_option("--dim", me_dim, "Embedding width")->capture_default_str()->check(CLI::Range(2, 1 << 20));
    membed->add_option("--noise", me_noise, "Weight of non-topic tokens")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    membed->add_option("--synthetic-labeled", me_syn_labeled, "Generate N texts per category instead of reading --input");
    membed->add_option("--synthetic-tweets", me_syn_tweets, "Generate N dated tweets instead of reading --input");
    membed->add_option("--dataset-out", me_dataset_out, "Where --synthetic-labeled writes its JSONL corpus")->group(detail::kOutputs);
    membed->add_option("--start", me_start, "First day for --synthetic-tweets")->capture_default_str();
    membed->add_option("--end", me_end, "Last day for --synthetic-tweets")->capture_default_str();

    // shared training inputs
    std::string dataset, embeddings, family = "svm", spec_file;
    int iterations = 30, initial = 5, folds = 10;
    const auto add_training = [&](CLI::App* sub) {
        sub->add_option("--dataset", dataset, "Canonical labeled JSONL corpus")->required();
        sub->add_option("--embeddings", embeddings, "Embedding store aligned with --dataset")->required();
    };
    const auto add_family = [&](CLI::App* sub) {
        sub->add_option("--family", family, "knn, logreg or svm")->capture_default_str()->check(CLI::IsMember({"knn", "logreg", "svm"}));
    };

    auto* tune = app.add_subcommand("tune", "Bayesian hyperparameter search with k-fold CV accuracy as objective");
    add_training(tune);
    add_family(tune);
    std::string history_out = "tune_history.jsonl", best_out = "best_spec.json";
    tune->add_option("--iterations", iterations, "Total trials")->capture_default_str()->check(CLI::PositiveNumber);
    tune->add_option("--initial", initial, "Quasi-random initial trials")->capture_default_str()->check(CLI::PositiveNumber);
    tune->add_option("--folds", folds, "Cross-validation folds")->capture_default_str()->check(CLI::Range(2, 1000));
    tune->add_option("--history", history_out, "Trial history JSONL")->capture_default_str()->group(detail::kOutputs);
    tune->add_option("--best-spec", best_out, "Best spec JSON")->capture_default_str()->group(detail::kOutputs);

    auto* train = app.add_subcommand("train", "Fit a classifier on the full dataset");
    add_training(train);
    add_family(train);
    std::string model_out = "model.bin";
    train->add_option("--spec", spec_file, "Spec JSON (e.g. from tune); otherwise family defaults");
    train->add_option("--model", model_out, "Model file to write")->capture_default_str()->group(detail::kOutputs);

    auto* evaluate = app.add_subcommand("evaluate", "Stratified k-fold cross-validation report");
    add_training(evaluate);
    add_family(evaluate);
    std::string report_out, confusion_out;
    evaluate->add_option("--spec", spec_file, "Spec JSON; otherwise family defaults");
    evaluate->add_option("--folds", folds, "Cross-validation folds")->capture_default_str()->check(CLI::Range(2, 1000));
    evaluate->add_option("--report", report_out, "Metrics report JSON")->group(detail::kOutputs);
    evaluate->add_option("--confusion", confusion_out, "Normalized confusion matrix CSV")->group(detail::kOutputs);

    std::string model_in, store_path, predictions_path;
    std::size_t chunk_size = 8192;
    double threshold = -1.0;
    auto* classify = app.add_subcommand("classify", "Batch inference over an embedding store");
    classify->add_option("--model", model_in, "Trained model")->required();
    classify->add_option("--store", store_path, "Embedding store")->required();
    classify->add_option("--output", predictions_path, "Predictions CSV (row,label,confidence)")->required()->group(detail::kOutputs);
    classify->add_option("--chunk-size", chunk_size, "Rows per read")->capture_default_str()->check(CLI::PositiveNumber);
    classify->add_option("--threshold", threshold, "Label predictions below this confidence Unclassified (default: off)");

    std::string metadata_path, start, end, format = "csv", report_path;
    int rolling = 1;
    auto* aggregate = app.add_subcommand("aggregate", "Daily category distributions from predictions and tweet metadata");
    aggregate->add_option("--predictions", predictions_path, "Predictions CSV from classify")->required();
    aggregate->add_option("--metadata", metadata_path, "Metadata sidecar JSONL {record_id, date, row}")->required();
    aggregate->add_option("--start", start, "First day (default: earliest in metadata)");
    aggregate->add_option("--end", end, "Last day (default: latest in metadata)");
    aggregate->add_option("--rolling", rolling, "Trailing rolling-average window in days")->capture_default_str()->check(CLI::PositiveNumber);
    aggregate->add_option("--format", format, "csv or json")->capture_default_str()->check(CLI::IsMember({"csv", "json"}));
    aggregate->add_option("--output", report_path, "Report file")->required()->group(detail::kOutputs);

    std::string out_dir;
    auto* pipeline = app.add_subcommand("pipeline", "tune, train on the full dataset, then classify and aggregate a store");
    add_training(pipeline);
    add_family(pipeline);
    pipeline->add_option("--store", store_path, "Embedding store with metadata sidecar")->required();
    pipeline->add_option("--iterations", iterations, "Total trials")->capture_default_str()->check(CLI::PositiveNumber);
    pipeline->add_option("--initial", initial, "Quasi-random initial trials")->capture_default_str()->check(CLI::PositiveNumber);
    pipeline->add_option("--folds", folds, "Cross-validation folds")->capture_default_str()->check(CLI::Range(2, 1000));
    pipeline->add_option("--chunk-size", chunk_size, "Rows per read")->capture_default_str()->check(CLI::PositiveNumber);
    pipeline->add_option("--threshold", threshold, "Confidence threshold (default: off)");
    pipeline->add_option("--start", start, "First day (default: earliest in metadata)");
    pipeline->add_option("--end", end, "Last day (default: latest in metadata)");
    pipeline->add_option("--rolling", rolling, "Also write a rolling-average report with this window (1 = off)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    pipeline->add_option("--out-dir", out_dir, "Directory for all outputs")->required()->group(detail::kOutputs);

    for (auto* sub : {ingest, membed, tune, train, evaluate, classify, aggregate, pipeline}) sub->configurable();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (g.version) {
        if (g.json) {
            nlohmann::ordered_json j;
            j["tool"] = "dscope";
            j["version"] = std::string(kVersion);
            out << j.dump() << "\n";
        } else {
            out << "dscope " << kVersion << "\n";
        }
        return kExitOk;
    }
    const auto subs = app.get_subcommands();
    if (subs.empty()) {
        err << app.help();
        return kExitUsage;
    }
    Context ctx{g, subs.front()->get_name(), detail::config_hash(app, *subs.front(), g.seed), out, err};
    const std::optional<double> thr = threshold >= 0.0 ? std::optional<double>(threshold) : std::nullopt;

    try {
        if (ingest->parsed()) {
            detail::require_file(in_path, "input");
            detail::require_writable_dir_of(out_path);
            if (intent_rules && !rules_path.empty()) throw UsageError("--rules and --intent-rules are exclusive");
            LabeledDataset ds = load_labeled_dataset(in_path);
            std::vector<MergeRule> rules;
            if (intent_rules) rules = intent_merge_rules();
            if (!rules_path.empty()) {
                detail::require_file(rules_path, "rules");
                std::ifstream rin(rules_path);
                rules = rules_from_json(nlohmann::json::parse(rin));
            }
            ds = apply_merge_rules(ds, rules);
            std::ostringstream body;
            write_labeled_dataset(ds, body);
            write_text_file(out_path, body.str());
            detail::write_provenance(ctx, out_path);
            out << "samples\t" << ds.size() << "\n";
            for (const auto& [cat, n] : label_distribution(ds)) out << category_name(cat) << "\t" << n << "\n";
            if (ds.unknown_field_count) err << "warning: ignored " << ds.unknown_field_count << " unknown fields\n";
        } else if (membed->parsed()) {
            detail::require_writable_dir_of(me_output);
            const int modes = (!me_input.empty()) + (me_syn_labeled > 0) + (me_syn_tweets > 0);
            if (modes != 1) throw UsageError("give exactly one of --input, --synthetic-labeled, --synthetic-tweets");
            if (me_syn_labeled > 0) {
                if (me_dataset_out.empty()) throw UsageError("--synthetic-labeled needs --dataset-out");
                detail::require_writable_dir_of(me_dataset_out);
                const LabeledDataset ds = synthetic_labeled_dataset(me_syn_labeled, g.seed);
                std::vector<std::string> texts;
                for (const auto& s : ds.samples) texts.push_back(s.text);
                std::ostringstream body;
                write_labeled_dataset(ds, body);
                write_text_file(me_dataset_out, body.str());
                detail::write_provenance(ctx, me_dataset_out);
                write_store(embed_to_vectors(texts, me_dim, g.seed, me_noise), me_output);
                out << "wrote " << ds.size() << " labeled samples\n";
            } else if (me_syn_tweets > 0) {
                const auto first = detail::optional_date(me_start), last = detail::optional_date(me_end);
                const auto tweets = synthetic_tweets(me_syn_tweets, *first, *last, g.seed);
                std::vector<std::string> texts;
                std::vector<TweetRecord> meta;
                for (const auto& t : tweets) {
                    texts.push_back(t.text);
                    meta.push_back(t.record);
                }
                write_store(embed_to_vectors(texts, me_dim, g.seed, me_noise), me_output, meta);
                out << "wrote " << tweets.size() << " tweets\n";
            } else {
                detail::require_file(me_input, "input");
                std::ifstream fin(me_input);
                std::vector<std::string> texts;
                std::vector<TweetRecord> meta;
                std::string line;
                std::size_t lineno = 0;
                while (std::getline(fin, line)) {
                    ++lineno;
                    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
                    nlohmann::json j;
                    try {
                        j = nlohmann::json::parse(line);
                    } catch (const nlohmann::json::parse_error&) {
                        throw DataError("line " + std::to_string(lineno) + ": malformed JSON");
                    }
                    if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
                        throw DataError("line " + std::to_string(lineno) + ": missing string field 'text'");
                    }
                    texts.push_back(nfc(j["text"].get<std::string>()));
                    if (j.contains("date")) {
                        nlohmann::json rec = {{"record_id", j.value("record_id", std::to_string(texts.size() - 1))},
                                              {"date", j["date"]},
                                              {"row", texts.size() - 1}};
                        meta.push_back(parse_tweet_record(rec.dump(), lineno));
                    }
                }
                if (!meta.empty() && meta.size() != texts.size()) throw DataError("either every line or no line must carry a date");
                write_store(embed_to_vectors(texts, me_dim, g.seed, me_noise), me_output, meta);
                out << "wrote " << texts.size() << " rows\n";
            }
            detail::write_provenance(ctx, me_output);
        } else if (tune->parsed()) {
            detail::require_file(dataset, "dataset");
            detail::require_file(embeddings, "embeddings");
            detail::require_writable_dir_of(history_out);
            detail::require_writable_dir_of(best_out);
            if (initial < 2 || iterations < initial) throw UsageError("need 2 <= --initial <= --iterations");
            const auto t = detail::load_training(dataset, embeddings);
            const auto o = detail::run_tune(ctx, t, parse_family(family), iterations, initial, folds);
            write_history_jsonl(o.result.history, history_out);
            detail::write_provenance(ctx, history_out);
            write_text_file(best_out, spec_to_json(o.best).dump(2) + "\n");
            detail::write_provenance(ctx, best_out);
            out << "best accuracy " << format_fixed6(o.result.best.value) << " at trial " << o.result.best.iteration << ": "
                << describe(o.best) << "\n";
        } else if (train->parsed()) {
            detail::require_file(dataset, "dataset");
            detail::require_file(embeddings, "embeddings");
            detail::require_writable_dir_of(model_out);
            const ClassifierSpec spec = detail::resolve_spec(spec_file, family);
            const auto t = detail::load_training(dataset, embeddings);
            const TrainedModel model = fit(spec, t.X, t.y);
            for (const auto& w : model.warnings()) err << "warning: " << w << "\n";
            save_model(model, model_out);
            detail::write_provenance(ctx, model_out);
            out << "trained " << describe(spec) << " on " << t.ds.size() << " samples\n";
        } else if (evaluate->parsed()) {
            detail::require_file(dataset, "dataset");
            detail::require_file(embeddings, "embeddings");
            if (!report_out.empty()) detail::require_writable_dir_of(report_out);
            if (!confusion_out.empty()) detail::require_writable_dir_of(confusion_out);
            const ClassifierSpec spec = detail::resolve_spec(spec_file, family);
            const auto t = detail::load_training(dataset, embeddings);
            const FoldAssignment fa = stratified_kfold(t.ds, folds, g.seed);
            const CrossValResult cv = cross_validate(spec, t.X, t.y, fa, g.threads);
            for (const auto& w : cv.warnings) err << "warning: " << w << "\n";
            if (!report_out.empty()) {
                write_text_file(report_out, report_to_json(cv, spec).dump(2) + "\n");
                detail::write_provenance(ctx, report_out);
            }
            if (!confusion_out.empty()) {
                std::ostringstream csv;
                write_confusion_csv(cv.confusion, csv);
                write_text_file(confusion_out, csv.str());
                detail::write_provenance(ctx, confusion_out);
            }
            out << "accuracy " << format_fixed6(cv.report.accuracy) << "\n"
                << "pooled_accuracy " << format_fixed6(cv.report.pooled_accuracy) << "\n"
                << "f1_micro " << format_fixed6(cv.report.f1_micro) << "\n"
                << "f1_macro " << format_fixed6(cv.report.f1_macro) << "\n";
        } else if (classify->parsed()) {
            detail::require_file(model_in, "model");
            detail::require_file(store_path, "store");
            detail::require_writable_dir_of(predictions_path);
            const TrainedModel model = load_model(model_in);
            StoreReader reader(store_path);
            BatchOptions bo{chunk_size, thr, g.threads};
            std::vector<RowPrediction> preds;
            std::uint64_t next_log = 1'000'000;
            batch_classify(model, reader, bo, [&](std::span<const RowPrediction> c) {
                preds.insert(preds.end(), c.begin(), c.end());
                while (preds.size() >= next_log) {
                    err << "classified " << next_log << "/" << reader.count() << " rows\n";
                    next_log += 1'000'000;
                }
            });
            detail::write_predictions_csv(preds, predictions_path);
            detail::write_provenance(ctx, predictions_path);
            out << "classified " << preds.size() << " rows\n";
        } else if (aggregate->parsed()) {
            detail::require_file(predictions_path, "predictions");
            detail::require_file(metadata_path, "metadata");
            detail::require_writable_dir_of(report_path);
            const auto first = detail::optional_date(start), last = detail::optional_date(end);
            const auto preds = detail::read_predictions_csv(predictions_path);
            std::uint64_t skipped = 0;
            TimelineSeries s = aggregate_daily(preds, read_sidecar(metadata_path), first, last, &skipped);
            if (rolling > 1) s = rolling_average(s, rolling);
            detail::emit_series(ctx, s, parse_report_format(format), report_path);
            if (skipped) err << "warning: " << skipped << " rows fall outside the date range\n";
            out << "wrote " << s.days.size() << " days\n";
        } else if (pipeline->parsed()) {
            detail::require_file(dataset, "dataset");
            detail::require_file(embeddings, "embeddings");
            detail::require_file(store_path, "store");
            detail::require_file(sidecar_path(store_path), "metadata sidecar");
            if (initial < 2 || iterations < initial) throw UsageError("need 2 <= --initial <= --iterations");
            const auto first = detail::optional_date(start), last = detail::optional_date(end);
            std::filesystem::create_directories(out_dir);
            const auto p = [&](const char* name) { return (std::filesystem::path(out_dir) / name).string(); };
            const auto t = detail::load_training(dataset, embeddings);
            const Family fam = parse_family(family);
            if (g.verbose) err << "tuning " << family << " (" << iterations << " trials, " << folds << " folds)\n";
            const auto o = detail::run_tune(ctx, t, fam, iterations, initial, folds);
            write_history_jsonl(o.result.history, p("tune_history.jsonl"));
            detail::write_provenance(ctx, p("tune_history.jsonl"));
            write_text_file(p("best_spec.json"), spec_to_json(o.best).dump(2) + "\n");
            detail::write_provenance(ctx, p("best_spec.json"));
            if (g.verbose) err << "training " << describe(o.best) << " on " << t.ds.size() << " samples\n";
            const TrainedModel model = fit(o.best, t.X, t.y);
            for (const auto& w : model.warnings()) err << "warning: " << w << "\n";
            save_model(model, p("model.bin"));
            detail::write_provenance(ctx, p("model.bin"));
            SurveillanceOptions so;
            so.batch = BatchOptions{chunk_size, thr, g.threads};
            so.first = first;
            so.last = last;
            so.on_progress = [&](std::uint64_t done, std::uint64_t total) { err << "classified " << done << "/" << total << " rows\n"; };
            const SurveillanceResult sr = run_surveillance(model, store_path, so);
            detail::emit_series(ctx, sr.series, ReportFormat::csv, p("timeline.csv"));
            detail::emit_series(ctx, sr.series, ReportFormat::json, p("timeline.json"));
            if (rolling > 1) detail::emit_series(ctx, rolling_average(sr.series, rolling), ReportFormat::csv, p("timeline_rolling.csv"));
            if (sr.skipped) err << "warning: " << sr.skipped << " rows fall outside the date range\n";
            out << "best accuracy " << format_fixed6(o.result.best.value) << ": " << describe(o.best) << "\n"
                << "classified " << sr.rows << " rows into " << sr.series.days.size() << " days\n";
        }
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const nlohmann::json::exception& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitOk;
}

}  // namespace dscope::cli
