// Command-line front end: data generation, training, inference and the radius
// sweep. Every subcommand writes a JSON manifest next to its main output.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tai/adapter.hpp"
#include "tai/dataio.hpp"
#include "tai/diagnostics.hpp"
#include "tai/error.hpp"
#include "tai/eval.hpp"
#include "tai/experiment.hpp"
#include "tai/internal/text_files.hpp"
#include "tai/perturb.hpp"
#include "tai/textgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tai;

namespace {

// Seed-stream tags for the data-selection steps done by the CLI (training
// itself derives its own streams from the same seed).
constexpr std::uint64_t kShotStream = 21;
constexpr std::uint64_t kMaskStream = 22;

struct Manifest {
    std::string command;
    json config = json::object();
    std::uint64_t seed = 0;
    std::map<std::string, std::string> inputs;  // path -> digest
    std::vector<std::string> outputs;

    void input(const fs::path& p) { inputs[p.string()] = hash_hex(file_digest(p)); }
    void output(const fs::path& p) { outputs.push_back(p.string()); }
};

json resolved_config(const CLI::App& sub) {
    json cfg = json::object();
    for (const CLI::Option* opt : sub.get_options()) {
        if (opt->get_lnames().empty()) continue;
        const std::string& name = opt->get_lnames().front();
        if (name == "help") continue;
        if (opt->get_type_size() == 0) {
            cfg[name] = opt->count() > 0;
            continue;
        }
        std::vector<std::string> values = opt->results();
        if (values.empty()) {
            const std::string def = opt->get_default_str();
            if (def.empty()) continue;
            values.push_back(def);
        }
        if (values.size() == 1 && opt->get_expected_max() <= 1)
            cfg[name] = values.front();
        else
            cfg[name] = values;
    }
    return cfg;
}

void write_manifest(const fs::path& path, const Manifest& m, double seconds) {
    json j;
    j["command"] = m.command;
    j["config"] = m.config;
    j["seed"] = m.seed;
    json inputs = json::object();
    for (const auto& [p, d] : m.inputs) inputs[p] = d;
    j["inputs"] = inputs;
    j["outputs"] = m.outputs;
    j["wall_time_seconds"] = seconds;
    write_text_file(path, j.dump(2) + "\n");
}

fs::path manifest_path_for(const fs::path& primary) {
    if (fs::is_directory(primary)) return primary / "manifest.json";
    return fs::path(primary.string() + ".manifest.json");
}

LabelVocab load_vocab(Manifest& m, const fs::path& p) {
    m.input(p);
    return LabelVocab::load(p);
}

EmbeddingStore load_store(Manifest& m, const fs::path& p, const LabelVocab& vocab) {
    m.input(p);
    return read_store(p, vocab);
}

void fail_config(const std::string& msg) { throw Error(ErrorCode::invalid_config, msg); }

// ---- training options shared by `train` and `sweep-radius` ----

struct TrainOptions {
    std::size_t epochs = 60;
    std::size_t batch_size = 64;
    double lr = 1e-4;
    double weight_decay = 0.01;
    double dropout = 0.5;
    std::vector<std::size_t> hidden;
    bool activate_output = false;
    double radius = 25.0;
    double image_radius = 1.0;
    double shift_radius = 10.0;
    std::string scheme = "surface";
    std::string image_scheme;
    std::uint64_t seed = 0;

    TrainConfig to_config() const {
        TrainConfig c;
        c.epochs = epochs;
        c.batch_size = batch_size;
        c.max_lr = lr;
        c.optimizer.weight_decay = weight_decay;
        c.dropout = dropout;
        c.hidden = hidden;
        c.activate_output = activate_output;
        c.perturb.text_radius = radius;
        c.perturb.image_radius = image_radius;
        c.perturb.shift_radius = shift_radius;
        c.perturb.scheme = parse_scheme(scheme);
        c.perturb.image_scheme = image_scheme.empty() ? c.perturb.scheme : parse_scheme(image_scheme);
        c.seed = seed;
        return c;
    }
};

void add_train_options(CLI::App* sub, TrainOptions& o) {
    sub->add_option("--epochs", o.epochs, "Training epochs")->capture_default_str();
    sub->add_option("--batch-size", o.batch_size, "Mini-batch size")->capture_default_str();
    sub->add_option("--lr", o.lr, "Peak learning rate of the 1-cycle schedule")->capture_default_str();
    sub->add_option("--weight-decay", o.weight_decay, "AdamW decoupled weight decay")->capture_default_str();
    sub->add_option("--dropout", o.dropout, "Dropout rate on hidden layers")->capture_default_str();
    sub->add_option("--hidden", o.hidden, "Hidden layer widths (default: d,d)")->delimiter(',');
    sub->add_flag("--activate-output", o.activate_output, "Apply ReLU and dropout after the output layer too");
    sub->add_option("--radius", o.radius, "Text perturbation radius")->capture_default_str();
    sub->add_option("--image-radius", o.image_radius, "Few-shot image perturbation radius")->capture_default_str();
    sub->add_option("--shift-radius", o.shift_radius, "Perturbation radius after the centroid shift")
        ->capture_default_str();
    sub->add_option("--scheme", o.scheme, "Noise sampling: surface or interior")->capture_default_str();
    sub->add_option("--image-scheme", o.image_scheme, "Image noise sampling (default: same as --scheme)");
    sub->add_option("--seed", o.seed, "Random seed")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Train multi-label recognition adapters on text embeddings and apply them to images."};
    app.set_config("--config", "", "TOML config file with the same keys as the flags");
    app.require_subcommand(1);

    std::optional<fs::path> manifest_override;
    app.add_option("--manifest", manifest_override, "Where to write the run manifest");

    // gen-prompt-texts
    struct {
        fs::path vocab, out, patterns;
        std::size_t count = 1000, min_k = kDefaultMinLabels, max_k = kDefaultMaxLabels;
        std::uint64_t seed = 0;
    } gp;
    auto* gen_prompt = app.add_subcommand("gen-prompt-texts", "Fill label combinations into prompt patterns");
    gen_prompt->add_option("--vocab", gp.vocab, "vocab.json")->required()->check(CLI::ExistingFile);
    gen_prompt->add_option("--count", gp.count, "Number of texts")->capture_default_str();
    gen_prompt->add_option("--min-labels", gp.min_k)->capture_default_str();
    gen_prompt->add_option("--max-labels", gp.max_k)->capture_default_str();
    gen_prompt->add_option("--patterns", gp.patterns, "File of prompt patterns, one per line (default: built-in set)")
        ->check(CLI::ExistingFile);
    gen_prompt->add_option("--seed", gp.seed)->capture_default_str();
    gen_prompt->add_option("--out", gp.out, "texts.jsonl")->required();

    // gen-instructions
    struct {
        fs::path vocab, out;
        std::string template_name = "instruction_1";
        std::size_t count = 1000, min_k = kDefaultMinLabels, max_k = kDefaultMaxLabels;
        std::uint64_t seed = 0;
    } gi;
    auto* gen_inst = app.add_subcommand("gen-instructions", "Write chat-model instructions for label combinations");
    gen_inst->add_option("--vocab", gi.vocab)->required()->check(CLI::ExistingFile);
    gen_inst->add_option("--template", gi.template_name, "instruction_1, instruction_2 or prompt_set")
        ->capture_default_str();
    gen_inst->add_option("--count", gi.count)->capture_default_str();
    gen_inst->add_option("--min-labels", gi.min_k)->capture_default_str();
    gen_inst->add_option("--max-labels", gi.max_k)->capture_default_str();
    gen_inst->add_option("--seed", gi.seed)->capture_default_str();
    gen_inst->add_option("--out", gi.out, "instructions.jsonl")->required();

    // ingest-responses
    struct {
        fs::path vocab, instructions, responses, out;
        std::size_t max_chars = kDefaultMaxTextChars;
    } ir;
    auto* ingest = app.add_subcommand("ingest-responses", "Join chat-model responses onto their instructions");
    ingest->add_option("--vocab", ir.vocab)->required()->check(CLI::ExistingFile);
    ingest->add_option("--instructions", ir.instructions)->required()->check(CLI::ExistingFile);
    ingest->add_option("--responses", ir.responses)->required()->check(CLI::ExistingFile);
    ingest->add_option("--max-chars", ir.max_chars, "Drop responses longer than this")->capture_default_str();
    ingest->add_option("--out", ir.out, "texts.jsonl")->required();

    // synth
    SynthConfig sc;
    fs::path synth_dir;
    auto* synth = app.add_subcommand("synth", "Generate the synthetic two-modality benchmark");
    synth->add_option("--labels", sc.num_labels)->capture_default_str();
    synth->add_option("--dim", sc.dim)->capture_default_str();
    synth->add_option("--texts", sc.num_texts)->capture_default_str();
    synth->add_option("--images", sc.num_images)->capture_default_str();
    synth->add_option("--gap", sc.gap_norm, "Modality gap norm")->capture_default_str();
    synth->add_option("--noise", sc.cluster_noise, "Expected norm of per-sample noise")->capture_default_str();
    synth->add_option("--max-labels", sc.max_labels_per_sample)->capture_default_str();
    synth->add_option("--seed", sc.seed)->capture_default_str();
    synth->add_option("--out-dir", synth_dir, "Receives vocab.json, texts.taie, images.taie")->required();

    // train
    TrainOptions to;
    struct {
        fs::path vocab, texts, images, out, log, centroids_out;
        std::string mode = "zsl";
        std::optional<std::size_t> shots;
        std::optional<double> known_rate;
        bool pll_images = false;
    } tr;
    auto* train_cmd = app.add_subcommand("train", "Train an adapter");
    train_cmd->add_option("--vocab", tr.vocab)->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--texts", tr.texts, "Text embedding store")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--images", tr.images, "Image store (few-shot pool for fsl, partial labels for pll)")
        ->check(CLI::ExistingFile);
    train_cmd->add_option("--mode", tr.mode, "zsl, fsl or pll")->capture_default_str();
    train_cmd->add_option("--shots", tr.shots, "fsl: images kept per label");
    train_cmd->add_option("--known-rate", tr.known_rate, "pll: fraction of labels revealed per image");
    train_cmd->add_flag("--pll-train-on-images", tr.pll_images, "pll: also train on the images, masking unknowns");
    add_train_options(train_cmd, to);
    train_cmd->add_option("--out", tr.out, "Checkpoint (.adpt)")->required();
    train_cmd->add_option("--log", tr.log, "Per-step training log (default: <out>.log.jsonl)");
    train_cmd->add_option("--centroids-out", tr.centroids_out, "pll: also write the centroid table");

    // estimate-centroids
    struct {
        fs::path vocab, texts, images, out;
        std::optional<double> known_rate;
        std::uint64_t seed = 0;
    } ec;
    auto* centroids_cmd = app.add_subcommand("estimate-centroids", "Compute visual centroids and text offsets");
    centroids_cmd->add_option("--vocab", ec.vocab)->required()->check(CLI::ExistingFile);
    centroids_cmd->add_option("--texts", ec.texts)->required()->check(CLI::ExistingFile);
    centroids_cmd->add_option("--images", ec.images)->required()->check(CLI::ExistingFile);
    centroids_cmd->add_option("--known-rate", ec.known_rate, "Mask image labels before estimating");
    centroids_cmd->add_option("--seed", ec.seed)->capture_default_str();
    centroids_cmd->add_option("--out", ec.out, "centroids.bin")->required();

    // predict
    struct {
        fs::path vocab, model, store, out;
        bool force = false;
    } pr;
    auto* predict_cmd = app.add_subcommand("predict", "Score every record of a store");
    predict_cmd->add_option("--vocab", pr.vocab)->required()->check(CLI::ExistingFile);
    predict_cmd->add_option("--model", pr.model)->required()->check(CLI::ExistingFile);
    predict_cmd->add_option("--store", pr.store)->required()->check(CLI::ExistingFile);
    predict_cmd->add_flag("--force", pr.force, "Load a checkpoint built for a different vocab");
    predict_cmd->add_option("--out", pr.out, "scores.jsonl")->required();

    // eval
    struct {
        fs::path vocab, scores, truth, out;
        bool per_label = false;
    } ev;
    auto* eval_cmd = app.add_subcommand("eval", "Mean average precision of a score file");
    eval_cmd->add_option("--vocab", ev.vocab)->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--scores", ev.scores)->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--truth", ev.truth, "Store holding the annotations")->required()->check(CLI::ExistingFile);
    eval_cmd->add_flag("--per-label", ev.per_label, "Include the per-label AP table");
    eval_cmd->add_option("--out", ev.out, "report.json")->required();

    // ensemble
    struct {
        fs::path a, b, out;
        bool per_file = false;
    } en;
    auto* ensemble_cmd = app.add_subcommand("ensemble", "Average two min-max scaled score files");
    ensemble_cmd->add_option("--a", en.a)->required()->check(CLI::ExistingFile);
    ensemble_cmd->add_option("--b", en.b)->required()->check(CLI::ExistingFile);
    ensemble_cmd->add_flag("--per-file", en.per_file, "Scale over the whole file instead of per label");
    ensemble_cmd->add_option("--out", en.out)->required();

    // sweep-radius
    TrainOptions so;
    struct {
        fs::path vocab, texts, images, out;
        std::vector<double> radii{0, 1, 2, 5, 10, 25};
    } sw;
    auto* sweep_cmd = app.add_subcommand("sweep-radius", "Image mAP of zsl training across perturbation radii");
    sweep_cmd->add_option("--vocab", sw.vocab)->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--texts", sw.texts)->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--images", sw.images)->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--radii", sw.radii)->delimiter(',')->capture_default_str();
    add_train_options(sweep_cmd, so);
    sweep_cmd->remove_option(sweep_cmd->get_option("--radius"));
    sweep_cmd->add_option("--out", sw.out, "CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << "\n";
        return 2;
    }

    const auto started = std::chrono::steady_clock::now();
    CLI::App* sub = app.get_subcommands().front();
    Manifest m;
    m.command = sub->get_name();
    m.config = resolved_config(*sub);
    fs::path primary;

    try {
        if (sub == gen_prompt) {
            const auto vocab = load_vocab(m, gp.vocab);
            std::vector<std::string> patterns = builtin_prompt_patterns();
            if (!gp.patterns.empty()) {
                m.input(gp.patterns);
                patterns = read_prompt_patterns(gp.patterns);
            }
            RandomSource rng(gp.seed);
            const auto texts = generate_prompt_texts(rng, vocab, gp.count, gp.min_k, gp.max_k, patterns);
            write_texts(gp.out, texts, vocab);
            m.seed = gp.seed;
            primary = gp.out;
            std::cerr << "wrote " << texts.size() << " texts to " << gp.out.string() << "\n";
        } else if (sub == gen_inst) {
            const auto vocab = load_vocab(m, gi.vocab);
            RandomSource rng(gi.seed);
            const auto file =
                emit_instructions(rng, vocab, gi.count, parse_template_id(gi.template_name), gi.min_k, gi.max_k, gi.out);
            m.seed = gi.seed;
            primary = gi.out;
            std::cerr << "wrote " << file.records.size() << " instructions to " << gi.out.string() << "\n";
        } else if (sub == ingest) {
            const auto vocab = load_vocab(m, ir.vocab);
            m.input(ir.instructions);
            m.input(ir.responses);
            const auto instructions = read_instructions(ir.instructions);
            if (instructions.vocab_hash != vocab.hash())
                throw Error(ErrorCode::vocab_mismatch, "instructions were generated against a different vocab");
            const auto result = ingest_responses(instructions, ir.responses, ir.max_chars);
            write_texts(ir.out, result.texts, vocab);
            primary = ir.out;
            m.config["dropped_too_long"] = result.dropped_too_long;
            m.config["skipped_empty"] = result.skipped_empty;
            std::cerr << "ingested " << result.texts.size() << " texts (" << result.dropped_too_long
                      << " too long, " << result.skipped_empty << " empty)\n";
        } else if (sub == synth) {
            const auto bench = synth_benchmark(sc);
            fs::create_directories(synth_dir);
            synth_vocab(sc.num_labels).save(synth_dir / "vocab.json");
            write_store(synth_dir / "texts.taie", bench.texts);
            write_store(synth_dir / "images.taie", bench.images);
            for (const char* f : {"vocab.json", "texts.taie", "images.taie"}) m.output(synth_dir / f);
            m.seed = sc.seed;
            primary = synth_dir;
        } else if (sub == train_cmd) {
            const auto vocab = load_vocab(m, tr.vocab);
            const auto texts = load_store(m, tr.texts, vocab);
            TrainConfig cfg = to.to_config();
            cfg.mode = parse_mode(tr.mode);
            cfg.pll_train_on_images = tr.pll_images;
            if (tr.shots && cfg.mode != TrainMode::fsl) fail_config("--shots only applies to --mode fsl");
            if (tr.known_rate && cfg.mode != TrainMode::pll) fail_config("--known-rate only applies to --mode pll");
            if (cfg.mode != TrainMode::zsl && tr.images.empty())
                fail_config("--mode " + tr.mode + " requires --images");
            if (!tr.centroids_out.empty() && cfg.mode != TrainMode::pll)
                fail_config("--centroids-out only applies to --mode pll");
            cfg.validate();

            std::optional<EmbeddingStore> images;
            if (!tr.images.empty()) images = load_store(m, tr.images, vocab);
            const RandomSource root(cfg.seed);
            if (images && tr.shots) {
                RandomSource rng = root.derive(kShotStream);
                images = select_shots(rng, *images, *tr.shots);
            }
            if (images && tr.known_rate) {
                RandomSource rng = root.derive(kMaskStream);
                images = mask_store(rng, *images, *tr.known_rate);
            }
            const auto result = train(texts, images ? &*images : nullptr, vocab, cfg);
            save_checkpoint(tr.out, result.checkpoint);
            const fs::path log_path = tr.log.empty() ? fs::path(tr.out.string() + ".log.jsonl") : tr.log;
            write_text_file(log_path, format_training_log(result.log));
            m.output(log_path);
            if (!tr.centroids_out.empty()) {
                write_centroids(tr.centroids_out, *result.centroids, vocab);
                m.output(tr.centroids_out);
            }
            m.seed = cfg.seed;
            primary = tr.out;
            std::cerr << "trained " << result.log.steps.size() << " steps, loss " << result.log.epoch_losses.front()
                      << " -> " << result.log.epoch_losses.back() << "\n";
        } else if (sub == centroids_cmd) {
            const auto vocab = load_vocab(m, ec.vocab);
            const auto texts = load_store(m, ec.texts, vocab);
            auto images = load_store(m, ec.images, vocab);
            if (ec.known_rate) {
                RandomSource rng = RandomSource(ec.seed).derive(kMaskStream);
                images = mask_store(rng, images, *ec.known_rate);
            }
            const auto table = build_centroid_table(texts.records, images.records);
            write_centroids(ec.out, table, vocab);
            m.seed = ec.seed;
            primary = ec.out;
        } else if (sub == predict_cmd) {
            const auto vocab = load_vocab(m, pr.vocab);
            m.input(pr.model);
            CheckpointLoadOptions opts;
            opts.expected_vocab_hash = vocab.hash();
            opts.force = pr.force;
            auto loaded = load_checkpoint(pr.model, opts);
            if (loaded.vocab_mismatch_forced) {
                warn("checkpoint vocab differs from --vocab; continuing because of --force");
                loaded.checkpoint.vocab_hash = vocab.hash();
            }
            const auto store = load_store(m, pr.store, vocab);
            write_scores(pr.out, predict(loaded.checkpoint, store));
            m.seed = loaded.checkpoint.seed;
            primary = pr.out;
        } else if (sub == eval_cmd) {
            const auto vocab = load_vocab(m, ev.vocab);
            m.input(ev.scores);
            const auto scores = read_scores(ev.scores);
            const auto truth = load_store(m, ev.truth, vocab);
            auto report = mean_ap(scores, truth);
            report.config = {{"scores", ev.scores.string()}, {"truth", ev.truth.string()}};
            write_text_file(ev.out, report.to_json(ev.per_label).dump(2) + "\n");
            primary = ev.out;
            std::printf("mAP %.6f over %zu labels\n", report.map, report.labels_evaluated);
        } else if (sub == ensemble_cmd) {
            m.input(en.a);
            m.input(en.b);
            const auto out = ensemble_scores(read_scores(en.a), read_scores(en.b),
                                              en.per_file ? EnsembleScaling::per_file : EnsembleScaling::per_label);
            write_scores(en.out, out);
            primary = en.out;
        } else if (sub == sweep_cmd) {
            const auto vocab = load_vocab(m, sw.vocab);
            const auto texts = load_store(m, sw.texts, vocab);
            const auto images = load_store(m, sw.images, vocab);
            TrainConfig cfg = so.to_config();
            cfg.validate();
            const auto rows = sweep_radius(texts, images, vocab, cfg, sw.radii);
            write_text_file(sw.out, format_sweep_csv(rows));
            for (const auto& r : rows) std::fprintf(stderr, "r=%g image mAP %.4f\n", r.radius, r.image_map);
            m.seed = cfg.seed;
            primary = sw.out;
        }

        if (!fs::is_directory(primary)) m.outputs.insert(m.outputs.begin(), primary.string());
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        write_manifest(manifest_override ? *manifest_override : manifest_path_for(primary), m, seconds);
    } catch (const Error& e) {
        std::cerr << json{{"error", error_code_name(e.code())}, {"message", e.what()}}.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
        return 1;
    }
    return 0;
}
