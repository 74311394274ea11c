#include "verse/plan.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <ostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "verse/error.hpp"

namespace verse {

void add_plan_options(CLI::App& app, PlanOptions& o) {
    app.set_config("--config", "", "Plan file (INI/TOML, keys are flag names)");
    app.allow_config_extras(false);

    app.add_option("--classes", o.classes, "Synthetic: number of classes")->capture_default_str();
    app.add_option("--instances", o.instances, "Synthetic: instances per class")->capture_default_str();
    app.add_option("--frames", o.frames, "Synthetic: frames per instance")->capture_default_str();
    app.add_option("--raw-dim", o.raw_dim, "Synthetic: raw feature dimension")->capture_default_str();
    app.add_option("--separation", o.separation, "Synthetic: class-mean scale")->capture_default_str();
    app.add_option("--instance-spread", o.instance_spread, "Synthetic: instance-anchor scale")->capture_default_str();
    app.add_option("--temporal-step", o.temporal_step, "Synthetic: frame-to-frame step")->capture_default_str();
    app.add_option("--noise", o.noise, "Synthetic: observation noise scale")->capture_default_str();
    app.add_option("--test-fraction", o.test_fraction, "Synthetic: fraction of instances held out")
        ->capture_default_str();
    app.add_option("--train-file", o.train_file, "Feature file for the training split");
    app.add_option("--test-file", o.test_file, "Feature file for the test split");

    app.add_option("--extractor", o.extractor, "projection | identity")->capture_default_str();
    app.add_option("--embed-dim", o.embed_dim, "Extractor output dimension")->capture_default_str();
    app.add_option("--hidden", o.hidden, "Hidden layer widths")->delimiter(',')->capture_default_str();
    app.add_option("--activation", o.activation, "relu | leaky_relu | tanh")->capture_default_str();

    app.add_option("--scheme", o.schemes, "iid | class_iid | instance | class_instance")
        ->delimiter(',')
        ->capture_default_str();
    app.add_option("--learner", o.learners, "verse | replay | finetune")->delimiter(',')->capture_default_str();
    app.add_option("--seed", o.seed, "Master seed")->capture_default_str();
    app.add_option("--runs", o.runs, "Seeds per (learner, scheme)")->capture_default_str();
    app.add_option("--eval-every", o.eval_every, "Evaluation period in steps (0 = class boundaries / 50)")
        ->capture_default_str();

    app.add_option("--alpha", o.alpha, "Virtual step size")->capture_default_str();
    app.add_option("--beta", o.beta, "Global step size")->capture_default_str();
    app.add_option("--lambda", o.lambda, "Self-distillation weight")->capture_default_str();
    app.add_option("--gamma", o.gamma, "Semantic-memory EMA momentum")->capture_default_str();
    app.add_option("--accept-rate", o.accept_rate, "Semantic-memory update probability")->capture_default_str();
    app.add_option("--replay-count", o.replay_count, "Rehearsal subset size")->capture_default_str();
    app.add_option("--buffer-capacity", o.buffer_capacity, "Episodic memory capacity")->capture_default_str();
    app.add_option("--policy", o.policy, "auto | reservoir | class_balanced")->capture_default_str();
    app.add_option("--inference-model", o.inference_model, "working | semantic")->capture_default_str();
    app.add_option("--baseline-lr", o.baseline_lr, "Step size of fine-tune and replay")->capture_default_str();

    app.add_option("--offline-epochs", o.offline_epochs, "Offline upper bound: epochs")->capture_default_str();
    app.add_option("--offline-lr", o.offline_lr, "Offline upper bound: step size")->capture_default_str();
    app.add_option("--offline-batch", o.offline_batch, "Offline upper bound: batch size")->capture_default_str();

    app.add_option("--out", o.out, "Output directory")->capture_default_str();
    app.add_option("--workers", o.workers, "Parallel grid workers")->capture_default_str();
    app.add_flag("--dry-run", o.dry_run, "Print the resolved grid and exit");
}

ExperimentPlan resolve_plan(const PlanOptions& o) {
    ExperimentPlan plan;
    plan.synthetic.num_classes = o.classes;
    plan.synthetic.instances_per_class = o.instances;
    plan.synthetic.frames_per_instance = o.frames;
    plan.synthetic.raw_dim = o.raw_dim;
    plan.synthetic.class_separation = o.separation;
    plan.synthetic.instance_spread = o.instance_spread;
    plan.synthetic.temporal_step = o.temporal_step;
    plan.synthetic.noise_scale = o.noise;
    plan.synthetic.test_fraction = o.test_fraction;
    if (o.train_file.empty() != o.test_file.empty()) {
        throw Error("train-file and test-file must be given together");
    }
    if (!o.train_file.empty()) plan.feature_files = FeatureFiles{o.train_file, o.test_file};

    if (o.extractor == "projection") {
        plan.extractor = ExtractorKind::random_projection;
    } else if (o.extractor == "identity") {
        plan.extractor = ExtractorKind::identity;
    } else {
        throw Error("unknown extractor '" + o.extractor + "' (projection | identity)");
    }
    plan.embed_dim = o.embed_dim;
    plan.hidden_dims = o.hidden;
    plan.activation = parse_activation(o.activation);

    plan.schemes.clear();
    for (const auto& s : o.schemes) plan.schemes.push_back(parse_scheme(s));
    plan.learners.clear();
    for (const auto& l : o.learners) plan.learners.push_back(parse_learner(l));
    plan.master_seed = o.seed;
    plan.runs = o.runs;
    plan.cadence.every = o.eval_every;

    auto& v = plan.learner.verse;
    v.alpha = o.alpha;
    v.beta = o.beta;
    v.lambda_distill = o.lambda;
    v.gamma = o.gamma;
    v.accept_rate = o.accept_rate;
    v.replay_count = o.replay_count;
    v.buffer_capacity = o.buffer_capacity;
    v.inference_model = parse_inference_model(o.inference_model);
    if (o.policy != "auto") plan.policy = parse_policy(o.policy);
    plan.learner.baseline_lr = o.baseline_lr;

    plan.offline.epochs = o.offline_epochs;
    plan.offline.lr = o.offline_lr;
    plan.offline.batch_size = o.offline_batch;

    plan.output_dir = o.out;
    plan.workers = o.workers;
    plan.validate();
    return plan;
}

ExperimentPlan parse_plan(const std::vector<std::string>& args) {
    CLI::App app{"verse plan"};
    PlanOptions options;
    add_plan_options(app, options);
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        throw Error(std::string("plan: ") + e.what());
    }
    return resolve_plan(options);
}

std::string plan_to_json(const ExperimentPlan& plan) {
    nlohmann::ordered_json j;
    if (plan.feature_files) {
        j["dataset"] = {{"train_file", plan.feature_files->train.string()},
                        {"test_file", plan.feature_files->test.string()}};
    } else {
        const auto& s = plan.synthetic;
        j["dataset"] = {{"classes", s.num_classes},
                        {"instances", s.instances_per_class},
                        {"frames", s.frames_per_instance},
                        {"raw_dim", s.raw_dim},
                        {"separation", s.class_separation},
                        {"instance_spread", s.instance_spread},
                        {"temporal_step", s.temporal_step},
                        {"noise", s.noise_scale},
                        {"test_fraction", s.test_fraction},
                        {"seed", plan.dataset_seed()}};
    }
    j["extractor"] = plan.extractor == ExtractorKind::identity ? "identity" : "projection";
    j["embed_dim"] = plan.embed_dim;
    j["hidden"] = plan.hidden_dims;
    j["activation"] = to_string(plan.activation);
    std::vector<std::string> schemes;
    for (auto s : plan.schemes) schemes.emplace_back(to_string(s));
    std::vector<std::string> learners;
    for (auto l : plan.learners) learners.emplace_back(to_string(l));
    j["schemes"] = schemes;
    j["learners"] = learners;
    j["seed"] = plan.master_seed;
    j["runs"] = plan.runs;
    j["run_seeds"] = plan.run_seeds();
    j["eval_every"] = plan.cadence.every;
    const auto& v = plan.learner.verse;
    j["alpha"] = v.alpha;
    j["beta"] = v.beta;
    j["lambda"] = v.lambda_distill;
    j["gamma"] = v.gamma;
    j["accept_rate"] = v.accept_rate;
    j["replay_count"] = v.replay_count;
    j["buffer_capacity"] = v.buffer_capacity;
    j["policy"] = plan.policy ? std::string(to_string(*plan.policy)) : std::string("auto");
    j["inference_model"] = to_string(v.inference_model);
    j["baseline_lr"] = plan.learner.baseline_lr;
    j["offline_epochs"] = plan.offline.epochs;
    j["offline_lr"] = plan.offline.lr;
    j["offline_batch"] = plan.offline.batch_size;
    return j.dump(2);
}

AblationAxis parse_axis(std::string_view name) {
    if (name == "buffer_capacity") return AblationAxis::buffer_capacity;
    if (name == "lambda") return AblationAxis::lambda;
    if (name == "accept_rate") return AblationAxis::accept_rate;
    if (name == "ema_on_off") return AblationAxis::ema_on_off;
    if (name == "replacement_policy") return AblationAxis::replacement_policy;
    throw Error("unknown ablation axis '" + std::string(name) +
                "' (buffer_capacity | lambda | accept_rate | ema_on_off | replacement_policy)");
}

std::string_view to_string(AblationAxis axis) {
    switch (axis) {
        case AblationAxis::buffer_capacity:
            return "buffer_capacity";
        case AblationAxis::lambda:
            return "lambda";
        case AblationAxis::accept_rate:
            return "accept_rate";
        case AblationAxis::ema_on_off:
            return "ema_on_off";
        case AblationAxis::replacement_policy:
            return "replacement_policy";
    }
    return "lambda";
}

namespace {

template <typename T>
T parse_value(const std::string& text, AblationAxis axis) {
    T value{};
    auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw Error("ablation value '" + text + "' is not valid for axis " + std::string(to_string(axis)));
    }
    return value;
}

}  // namespace

ExperimentPlan apply_axis(const ExperimentPlan& base, AblationAxis axis, const std::string& value) {
    ExperimentPlan plan = base;
    auto& v = plan.learner.verse;
    switch (axis) {
        case AblationAxis::buffer_capacity:
            v.buffer_capacity = parse_value<std::size_t>(value, axis);
            break;
        case AblationAxis::lambda:
            v.lambda_distill = parse_value<double>(value, axis);
            break;
        case AblationAxis::accept_rate:
            v.accept_rate = parse_value<double>(value, axis);
            break;
        case AblationAxis::ema_on_off:
            if (value == "off") {
                v.accept_rate = 0.0;
            } else if (value != "on") {
                throw Error("ema_on_off values are 'on' or 'off', got '" + value + "'");
            }
            break;
        case AblationAxis::replacement_policy:
            plan.policy = parse_policy(value);
            break;
    }
    plan.output_dir = base.output_dir / ("ablate_" + std::string(to_string(axis))) / value;
    plan.validate();
    return plan;
}

void print_dry_run(const ExperimentPlan& plan, std::ostream& out) {
    const auto cells = expand_grid(plan);
    out << "resolved plan:\n" << plan_to_json(plan) << "\n";
    out << "grid (" << cells.size() << " runs):\n";
    for (const auto& c : cells) {
        out << "  " << to_string(c.learner) << ' ' << to_string(c.scheme) << ' ' << c.seed << '\n';
    }
}

namespace {

void write_plan_echo(const ExperimentPlan& plan) {
    std::filesystem::create_directories(plan.output_dir);
    std::ofstream out(plan.output_dir / "plan.json");
    out << plan_to_json(plan) << '\n';
    if (!out) throw Error("cannot write plan echo into '" + plan.output_dir.string() + "'");
}

bool any_failed(const std::vector<RunRecord>& records) {
    return std::any_of(records.begin(), records.end(), [](const auto& r) { return r.status != RunStatus::ok; });
}

void report_failures(const std::vector<RunRecord>& records, std::ostream& err) {
    for (const auto& r : records) {
        if (r.status != RunStatus::ok) {
            err << "run failed (" << r.learner << ", " << r.scheme << ", seed " << r.seed << "): " << r.error << '\n';
        }
    }
}

}  // namespace

int cmd_generate(const ExperimentPlan& plan, std::ostream& out, std::ostream& err) {
    try {
        auto cfg = plan.synthetic;
        cfg.seed = plan.dataset_seed();
        const auto split = generate_synthetic(cfg);
        std::filesystem::create_directories(plan.output_dir);
        export_features(split.train, plan.output_dir / "train.csv");
        export_features(split.test, plan.output_dir / "test.csv");
        out << "wrote " << split.train.size() << " train and " << split.test.size() << " test samples to "
            << plan.output_dir.string() << '\n';
        return 0;
    } catch (const std::exception& e) {
        err << "generate: " << e.what() << '\n';
        return 1;
    }
}

int cmd_run(const ExperimentPlan& plan, bool dry_run, std::ostream& out, std::ostream& err) {
    if (dry_run) {
        print_dry_run(plan, out);
        return 0;
    }
    try {
        plan.validate();
        const auto records = run_experiment(plan);
        write_plan_echo(plan);
        write_records(records, plan.output_dir);
        print_run_table(records, out);
        out << '\n';
        print_group_table(summarize(records), out);
        report_failures(records, err);
        return any_failed(records) ? 1 : 0;
    } catch (const std::exception& e) {
        err << "run: " << e.what() << '\n';
        return 1;
    }
}

int cmd_ablate(const ExperimentPlan& plan, AblationAxis axis, const std::vector<std::string>& values, bool dry_run,
               std::ostream& out, std::ostream& err) {
    if (values.empty()) {
        err << "ablate: no values given\n";
        return 1;
    }
    try {
        std::vector<ExperimentPlan> variants;
        for (const auto& value : values) variants.push_back(apply_axis(plan, axis, value));
        if (dry_run) {
            for (std::size_t i = 0; i < variants.size(); ++i) {
                out << "== " << to_string(axis) << " = " << values[i] << '\n';
                print_dry_run(variants[i], out);
            }
            return 0;
        }
        const LoadedData data = load_data(plan);
        bool failed = false;
        out << std::left << std::setw(20) << to_string(axis) << std::setw(10) << "learner" << std::setw(16)
            << "scheme" << std::setw(6) << "runs" << std::setw(12) << "mean_mu" << std::setw(12) << "median_mu"
            << "median_omega\n";
        for (std::size_t i = 0; i < variants.size(); ++i) {
            const auto records = run_experiment(variants[i], data);
            write_plan_echo(variants[i]);
            write_records(records, variants[i].output_dir);
            report_failures(records, err);
            failed = failed || any_failed(records);
            for (const auto& g : summarize(records)) {
                out << std::left << std::setw(20) << values[i] << std::setw(10) << g.learner << std::setw(16)
                    << g.scheme << std::setw(6) << g.runs << std::fixed << std::setprecision(4) << std::setw(12)
                    << g.mean_mu << std::setw(12) << g.median_mu;
                if (g.median_omega) {
                    out << *g.median_omega << '\n';
                } else {
                    out << "n/a\n";
                }
            }
        }
        return failed ? 1 : 0;
    } catch (const std::exception& e) {
        err << "ablate: " << e.what() << '\n';
        return 1;
    }
}

int cmd_report(const std::filesystem::path& dir, std::ostream& out, std::ostream& err) {
    try {
        const auto records = read_records(dir);
        print_run_table(records, out);
        out << '\n';
        print_group_table(summarize(records), out);
        return 0;
    } catch (const std::exception& e) {
        err << "report: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace verse
