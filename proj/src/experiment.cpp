#include "verse/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>

#include <nlohmann/json.hpp>

#include "verse/error.hpp"
#include "verse/seed.hpp"

namespace verse {

using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json optional_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

std::string format_optional(const std::optional<double>& v) {
    if (!v) return "n/a";
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << *v;
    return s.str();
}

}  // namespace

void ExperimentPlan::validate() const {
    if (schemes.empty()) throw Error("plan: at least one scheme required");
    if (learners.empty()) throw Error("plan: at least one learner required");
    if (runs < 1) throw Error("plan: runs >= 1 required");
    if (workers < 1) throw Error("plan: workers >= 1 required");
    if (embed_dim < 1) throw Error("plan: embed_dim >= 1 required");
    for (auto h : hidden_dims) {
        if (h < 1) throw Error("plan: hidden widths must be >= 1");
    }
    if (offline.batch_size < 1) throw Error("plan: offline_batch >= 1 required");
    if (!(offline.lr > 0.0)) throw Error("plan: offline_lr > 0 required");
    learner.validate();
    if (feature_files) {
        for (const auto& p : {feature_files->train, feature_files->test}) {
            if (!std::filesystem::exists(p)) throw Error("plan: feature file '" + p.string() + "' does not exist");
        }
    } else {
        synthetic.validate();
    }
}

std::vector<std::uint64_t> ExperimentPlan::run_seeds() const {
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < runs; ++i) seeds.push_back(derive_seed(master_seed, static_cast<std::uint64_t>(i)));
    return seeds;
}

std::uint64_t ExperimentPlan::dataset_seed() const { return derive_seed(master_seed, "dataset"); }

LoadedData load_data(const ExperimentPlan& plan) {
    Dataset train;
    Dataset test;
    if (plan.feature_files) {
        train = ingest_features(plan.feature_files->train);
        test = ingest_features(plan.feature_files->test);
        require_dim("test file dim vs train file dim", train.dim, test.dim);
        require_dim("test file classes vs train file classes", train.num_classes, test.num_classes);
    } else {
        auto cfg = plan.synthetic;
        cfg.seed = plan.dataset_seed();
        auto split = generate_synthetic(cfg);
        train = std::move(split.train);
        test = std::move(split.test);
    }
    for (int c = 0; c < static_cast<int>(train.num_classes); ++c) {
        auto has = [c](const Dataset& d) {
            return std::any_of(d.samples.begin(), d.samples.end(), [c](const auto& s) { return s.label == c; });
        };
        if (!has(train) || !has(test)) {
            throw Error("dataset: class " + std::to_string(c) + " needs at least one train and one test sample");
        }
    }

    const FrozenExtractor extractor = plan.extractor == ExtractorKind::identity
                                          ? FrozenExtractor::identity(train.dim)
                                          : FrozenExtractor(train.dim, plan.embed_dim,
                                                            derive_seed(plan.master_seed, "extractor"));
    LoadedData data;
    data.train = embed(train, extractor);
    data.test = embed(test, extractor);
    data.shape = NetworkShape{extractor.output_dim(), plan.hidden_dims, train.num_classes, plan.activation};
    data.shape.validate();
    return data;
}

std::vector<GridCell> expand_grid(const ExperimentPlan& plan) {
    std::vector<GridCell> cells;
    const auto seeds = plan.run_seeds();
    for (auto learner : plan.learners) {
        for (auto scheme : plan.schemes) {
            for (auto seed : seeds) cells.push_back(GridCell{learner, scheme, seed});
        }
    }
    return cells;
}

std::vector<RunRecord> run_experiment(const ExperimentPlan& plan, const LoadedData& data) {
    const auto cells = expand_grid(plan);
    OfflineConfig offline_cfg = plan.offline;
    offline_cfg.seed = derive_seed(plan.master_seed, "offline");
    OfflineReferences offline(data.train, data.test, data.shape, offline_cfg);

    std::vector<RunRecord> records(cells.size());
    auto run_cell = [&](std::size_t i) {
        const auto& cell = cells[i];
        RunSetup setup;
        setup.learner = plan.learner;
        setup.learner.kind = cell.learner;
        setup.learner.verse.policy =
            plan.policy.value_or(parse_policy(default_policy_name(cell.scheme)));
        setup.scheme = cell.scheme;
        setup.seed = cell.seed;
        setup.cadence = plan.cadence;
        try {
            records[i] = run_stream(data.train, data.test, data.shape, setup, offline).record;
        } catch (const std::exception& e) {
            RunRecord failed;
            failed.learner = std::string(to_string(cell.learner));
            failed.scheme = std::string(to_string(cell.scheme));
            failed.seed = cell.seed;
            failed.status = RunStatus::failed;
            failed.error = e.what();
            records[i] = std::move(failed);
        }
    };

    const std::size_t workers = std::min(plan.workers, std::max<std::size_t>(cells.size(), 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(i);
            });
        }
    }
    return records;
}

std::vector<RunRecord> run_experiment(const ExperimentPlan& plan) {
    plan.validate();
    return run_experiment(plan, load_data(plan));
}

std::string eval_point_line(const RunRecord& record, std::size_t index) {
    const auto& p = record.eval_points.at(index);
    ordered_json j;
    j["learner"] = record.learner;
    j["scheme"] = record.scheme;
    j["seed"] = record.seed;
    j["t"] = p.t;
    j["seen_classes"] = std::vector<int>(p.seen_classes.begin(), p.seen_classes.end());
    j["accuracy"] = p.accuracy;
    j["offline_accuracy"] = record.offline_refs.at(index);
    j["semantic_accuracy"] = p.semantic_accuracy ? ordered_json(*p.semantic_accuracy) : ordered_json(nullptr);
    return j.dump();
}

std::string summary_line(const RunRecord& record) {
    ordered_json j;
    j["learner"] = record.learner;
    j["scheme"] = record.scheme;
    j["seed"] = record.seed;
    j["status"] = record.status == RunStatus::ok ? "ok" : "failed";
    j["error"] = record.error;
    j["eval_points"] = record.eval_points.size();
    if (record.status == RunStatus::ok && !record.eval_points.empty()) {
        j["mu_all"] = mu_all(record);
        j["omega_all"] = optional_json(defined_omega(accuracies(record), record.offline_refs));
        if (auto sem = semantic_accuracies(record)) {
            j["mu_all_semantic"] = mu_all(*sem);
            j["omega_all_semantic"] = optional_json(defined_omega(*sem, record.offline_refs));
        }
    }
    j["config"] = record.config.empty() ? ordered_json(nullptr) : ordered_json::parse(record.config);
    return j.dump();
}

void write_records(const std::vector<RunRecord>& records, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream points(dir / "eval_points.jsonl");
    std::ofstream summary(dir / "summary.jsonl");
    if (!points || !summary) throw Error("cannot write records into '" + dir.string() + "'");
    for (const auto& r : records) {
        for (std::size_t i = 0; i < r.eval_points.size(); ++i) points << eval_point_line(r, i) << '\n';
        summary << summary_line(r) << '\n';
    }
    if (!points || !summary) throw Error("writing records into '" + dir.string() + "' failed");
}

std::vector<RunRecord> read_records(const std::filesystem::path& dir) {
    std::ifstream summary(dir / "summary.jsonl");
    std::ifstream points(dir / "eval_points.jsonl");
    if (!summary || !points) throw Error("no records found in '" + dir.string() + "'");

    using Key = std::tuple<std::string, std::string, std::uint64_t>;
    std::vector<RunRecord> records;
    std::map<Key, std::size_t> index;
    std::string line;
    std::size_t line_no = 0;
    try {
        while (std::getline(summary, line)) {
            ++line_no;
            if (line.empty()) continue;
            const auto j = nlohmann::json::parse(line);
            RunRecord r;
            r.learner = j.at("learner").get<std::string>();
            r.scheme = j.at("scheme").get<std::string>();
            r.seed = j.at("seed").get<std::uint64_t>();
            r.status = j.at("status") == "ok" ? RunStatus::ok : RunStatus::failed;
            r.error = j.at("error").get<std::string>();
            if (!j.at("config").is_null()) r.config = j.at("config").dump();
            index[{r.learner, r.scheme, r.seed}] = records.size();
            records.push_back(std::move(r));
        }
        line_no = 0;
        while (std::getline(points, line)) {
            ++line_no;
            if (line.empty()) continue;
            const auto j = nlohmann::json::parse(line);
            const Key key{j.at("learner").get<std::string>(), j.at("scheme").get<std::string>(),
                          j.at("seed").get<std::uint64_t>()};
            auto it = index.find(key);
            if (it == index.end()) {
                throw Error("eval_points.jsonl line " + std::to_string(line_no) + ": run missing from summary");
            }
            auto& r = records[it->second];
            EvalPoint p;
            p.t = j.at("t").get<std::uint64_t>();
            for (int c : j.at("seen_classes")) p.seen_classes.insert(c);
            p.accuracy = j.at("accuracy").get<double>();
            if (!j.at("semantic_accuracy").is_null()) p.semantic_accuracy = j.at("semantic_accuracy").get<double>();
            r.offline_refs.push_back(j.at("offline_accuracy").get<double>());
            r.eval_points.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error("line " + std::to_string(line_no) + ": " + e.what());
    }
    return records;
}

std::optional<double> defined_omega(std::span<const double> accuracies, std::span<const double> offline_refs) {
    if (std::any_of(offline_refs.begin(), offline_refs.end(), [](double r) { return !(r > 0.0); })) {
        return std::nullopt;
    }
    return omega_all(accuracies, offline_refs);
}

double median(std::vector<double> values) {
    if (values.empty()) throw Error("median of an empty set");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<GroupSummary> summarize(const std::vector<RunRecord>& records) {
    std::vector<GroupSummary> groups;
    std::map<std::pair<std::string, std::string>, std::pair<std::vector<double>, std::vector<double>>> values;
    std::map<std::pair<std::string, std::string>, std::size_t> position;
    for (const auto& r : records) {
        const auto key = std::make_pair(r.learner, r.scheme);
        if (!position.contains(key)) {
            position[key] = groups.size();
            GroupSummary g;
            g.learner = r.learner;
            g.scheme = r.scheme;
            groups.push_back(std::move(g));
        }
        auto& g = groups[position[key]];
        ++g.runs;
        if (r.status != RunStatus::ok || r.eval_points.empty()) {
            ++g.failed;
            continue;
        }
        values[key].first.push_back(mu_all(r));
        if (auto omega = defined_omega(accuracies(r), r.offline_refs)) values[key].second.push_back(*omega);
    }
    for (auto& g : groups) {
        const auto& [mus, omegas] = values[{g.learner, g.scheme}];
        if (mus.empty()) continue;
        g.mean_mu = mu_all(mus);
        g.median_mu = median(mus);
        if (omegas.empty()) continue;
        g.mean_omega = mu_all(omegas);
        g.median_omega = median(omegas);
    }
    return groups;
}

void print_run_table(const std::vector<RunRecord>& records, std::ostream& out) {
    out << std::left << std::setw(10) << "learner" << std::setw(16) << "scheme" << std::setw(22) << "seed"
        << std::setw(10) << "mu_all" << std::setw(10) << "omega_all" << "status\n";
    for (const auto& r : records) {
        out << std::left << std::setw(10) << r.learner << std::setw(16) << r.scheme << std::setw(22) << r.seed;
        if (r.status == RunStatus::ok && !r.eval_points.empty()) {
            out << std::fixed << std::setprecision(4) << std::setw(10) << mu_all(r) << std::setw(10)
                << format_optional(defined_omega(accuracies(r), r.offline_refs)) << "ok\n";
        } else {
            out << std::setw(10) << "-" << std::setw(10) << "-" << "failed: " << r.error << '\n';
        }
    }
}

void print_group_table(const std::vector<GroupSummary>& groups, std::ostream& out) {
    out << std::left << std::setw(10) << "learner" << std::setw(16) << "scheme" << std::setw(6) << "runs"
        << std::setw(12) << "mean_mu" << std::setw(12) << "median_mu" << std::setw(12) << "mean_omega"
        << "median_omega\n";
    for (const auto& g : groups) {
        out << std::left << std::setw(10) << g.learner << std::setw(16) << g.scheme << std::setw(6) << g.runs
            << std::fixed << std::setprecision(4) << std::setw(12) << g.mean_mu << std::setw(12) << g.median_mu
            << std::setw(12) << format_optional(g.mean_omega) << format_optional(g.median_omega) << '\n';
    }
}

}  // namespace verse
