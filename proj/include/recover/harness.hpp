#pragma once
// Experiment harness: the feasibility-masked 12x12 task/failure matrix, the
// recover-vs-baseline cost accounting, and CSV/text reports.

#include <atomic>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "recover/orchestrator.hpp"

namespace recover {

inline const std::vector<std::pair<std::string, std::string>>& task_files() {
    static const std::vector<std::pair<std::string, std::string>> entries = {
        {"T1", "tasks/t01_serve_wine.task"},
        {"T2", "tasks/t02_make_coffee.task"},
        {"T3", "tasks/t03_boil_water.task"},
        {"T4", "tasks/t04_fry_egg.task"},
        {"T5", "tasks/t05_toast_bread.task"},
        {"T6", "tasks/t06_warm_water.task"},
        {"T7", "tasks/t07_cook_potato_slice.task"},
        {"T8", "tasks/t08_simple_salad.task"},
        {"T9", "tasks/t09_clean_kitchen.task"},
        {"T10", "tasks/t10_vegetarian_sandwich.task"},
        {"T11", "tasks/t11_cook_egg_and_potato.task"},
        {"T12", "tasks/t12_complex_salad.task"},
    };
    return entries;
}

struct SuiteConfig {
    std::string data_dir = RECOVER_DATA_DIR;
    std::string schema_file = "ontothor.schema";
    std::string rules_file = "failure_rules.rules";
    CostModel cost;
    PerceptConfig percept;
    double ground_threshold = 0.35;
    int workers = 4;
    uint64_t seed = 1;
    // (task, failure) pairs whose baseline verifier never detects
    std::vector<std::pair<std::string, int>> never_detect = {{"T10", 9}};

    std::string schema_path() const { return data_dir + "/" + schema_file; }
    std::string rules_path() const { return data_dir + "/" + rules_file; }
    std::string task_path(const std::string& id) const {
        for (const auto& [tid, file] : task_files())
            if (tid == id) return data_dir + "/" + file;
        throw Error("unknown task id " + id);
    }

    static SuiteConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open suite config " + path);
        nlohmann::json j = nlohmann::json::parse(in);
        SuiteConfig c;
        if (j.contains("data_dir")) c.data_dir = j["data_dir"];
        if (j.contains("schema_file")) c.schema_file = j["schema_file"];
        if (j.contains("rules_file")) c.rules_file = j["rules_file"];
        if (j.contains("workers")) c.workers = j["workers"];
        if (j.contains("seed")) c.seed = j["seed"];
        if (j.contains("ground_threshold")) c.ground_threshold = j["ground_threshold"];
        if (j.contains("tokens_per_word")) c.cost.tokens_per_word = j["tokens_per_word"];
        if (j.contains("price_per_1k_prompt")) c.cost.price_per_1k_prompt = j["price_per_1k_prompt"];
        if (j.contains("price_per_1k_completion")) c.cost.price_per_1k_completion = j["price_per_1k_completion"];
        if (j.contains("budget")) c.cost.budget = j["budget"];
        if (j.contains("near_radius")) c.percept.near_radius = j["near_radius"];
        if (j.contains("never_detect")) {
            c.never_detect.clear();
            for (const auto& nd : j["never_detect"])
                c.never_detect.emplace_back(nd.at(0).get<std::string>(), nd.at(1).get<int>());
        }
        return c;
    }
};

struct MatrixCell {
    std::string task;
    int failure = 0;
    bool feasible = false;
    Outcome outcome = Outcome::NoFailure;
    int trigger_step = -1;    // where the failure was injected
    int detection_step = -1;  // where the verifier fired
    std::string detected_class;
    std::string expected_class;
    int planner_calls = 0;
    double cost = 0.0;
    std::string note;
};

struct MatrixReport {
    std::vector<MatrixCell> cells;  // ordered by task then failure
    int feasible_pairs = 0;
    int completed = 0;
    int recovered_only = 0;
    int not_recovered = 0;
    double recovery_rate = 0.0;
    double completion_rate_easy = 0.0;
    double completion_rate_complex = 0.0;
};

namespace harness_detail {

inline bool is_easy(const Task& t) { return t.plan.size() <= 20; }

inline std::string fmt(double x) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << x;
    return os.str();
}

struct Corpus {
    KnowledgeBase kb;
    std::vector<RuleAst> rules;
    std::map<std::string, Task> tasks;

    explicit Corpus(const SuiteConfig& cfg) {
        kb.load_schema(cfg.schema_path());
        rules = load_rules(cfg.rules_path());
        auto report = validate_corpus(rules, kb);
        if (!report.ok()) throw Error("rule corpus leaves failure classes uncovered");
        for (const auto& [id, file] : task_files()) tasks.emplace(id, load_task(cfg.data_dir + "/" + file, kb));
    }
};

inline void recompute_aggregates(MatrixReport& r, const Corpus& corpus) {
    r.feasible_pairs = r.completed = r.recovered_only = r.not_recovered = 0;
    int easy_done = 0, easy_total = 0, complex_done = 0, complex_total = 0;
    for (const auto& c : r.cells) {
        if (!c.feasible) continue;
        ++r.feasible_pairs;
        bool easy = is_easy(corpus.tasks.at(c.task));
        (easy ? easy_total : complex_total) += 1;
        if (c.outcome == Outcome::RecoveredAndCompleted) {
            ++r.completed;
            (easy ? easy_done : complex_done) += 1;
        } else if (c.outcome == Outcome::RecoveredNotCompleted) {
            ++r.recovered_only;
        } else {
            ++r.not_recovered;
        }
    }
    if (r.feasible_pairs)
        r.recovery_rate = static_cast<double>(r.completed + r.recovered_only) / r.feasible_pairs;
    if (easy_total) r.completion_rate_easy = static_cast<double>(easy_done) / easy_total;
    if (complex_total) r.completion_rate_complex = static_cast<double>(complex_done) / complex_total;
}

}  // namespace harness_detail

// Runs every feasible (task, failure) pair once with the rule verifier and
// the template planner. Cells run in parallel up to the worker limit;
// per-cell errors are recorded, never thrown.
inline MatrixReport run_matrix(const SuiteConfig& cfg) {
    harness_detail::Corpus corpus(cfg);
    std::vector<MatrixCell> cells;
    for (const auto& [tid, _] : task_files())
        for (int f = 1; f <= 12; ++f) {
            MatrixCell c;
            c.task = tid;
            c.failure = f;
            cells.push_back(c);
        }

    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            MatrixCell& c = cells[i];
            const Task& task = corpus.tasks.at(c.task);
            try {
                c.expected_class = failure_class_of(c.failure);
                if (!feasible(corpus.kb, task, c.failure)) continue;
                c.feasible = true;
                FailureInjection inj = resolve_injection(corpus.kb, task, c.failure);
                c.trigger_step = inj.trigger_step;
                RunConfig rc;
                rc.injections = {inj};
                rc.seed = cfg.seed;
                rc.percept = cfg.percept;
                rc.ground_threshold = cfg.ground_threshold;
                rc.cost = cfg.cost;
                TemplatePlanner planner(corpus.kb, cfg.cost);
                RunRecord record = run_recover(corpus.kb, task, rc, corpus.rules, planner);
                c.outcome = record.outcome;
                c.detection_step = record.detection_step;
                if (record.finding) c.detected_class = record.finding->failure_class;
                c.planner_calls = static_cast<int>(record.planner_calls.size());
                c.cost = record.total_cost;
                if (!record.audit_ok) c.note = "audit failed";
                if (!record.note.empty()) c.note = record.note;
            } catch (const std::exception& e) {
                c.note = e.what();
                if (c.feasible) c.outcome = Outcome::NotRecovered;
            }
        }
    };
    std::vector<std::thread> pool;
    int n_workers = std::max(1, cfg.workers);
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    MatrixReport report;
    report.cells = std::move(cells);
    harness_detail::recompute_aggregates(report, corpus);
    return report;
}

inline std::string matrix_csv(const MatrixReport& r) {
    std::ostringstream os;
    os << "task,failure,feasible,outcome,trigger_step,detection_step,detected_class,expected_class,"
          "planner_calls,cost,note\n";
    for (const auto& c : r.cells) {
        os << c.task << ',' << c.failure << ',' << (c.feasible ? 1 : 0) << ','
           << (c.feasible ? outcome_name(c.outcome) : "infeasible") << ',' << c.trigger_step << ','
           << c.detection_step << ',' << c.detected_class << ',' << c.expected_class << ','
           << c.planner_calls << ',' << harness_detail::fmt(c.cost) << ',' << c.note << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Cost study
// ---------------------------------------------------------------------------

struct CostCell {
    std::string task;
    int failure = 0;
    int trigger_step = -1;
    double recover_cost = 0.0;
    int recover_calls = 0;
    double baseline_cost = 0.0;
    size_t baseline_verifier_calls = 0;
    bool baseline_budget_halted = false;
};

struct CostReport {
    std::vector<CostCell> cells;
    double budget = 5.0;
};

inline CostReport run_cost(const SuiteConfig& cfg) {
    harness_detail::Corpus corpus(cfg);
    CostReport report;
    report.budget = cfg.cost.budget;
    std::vector<CostCell> cells;
    for (const auto& [tid, _] : task_files())
        for (int f = 1; f <= 12; ++f)
            if (feasible(corpus.kb, corpus.tasks.at(tid), f)) {
                CostCell c;
                c.task = tid;
                c.failure = f;
                cells.push_back(c);
            }

    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            CostCell& c = cells[i];
            const Task& task = corpus.tasks.at(c.task);
            FailureInjection inj = resolve_injection(corpus.kb, task, c.failure);
            c.trigger_step = inj.trigger_step;
            RunConfig rc;
            rc.injections = {inj};
            rc.seed = cfg.seed;
            rc.percept = cfg.percept;
            rc.ground_threshold = cfg.ground_threshold;
            rc.cost = cfg.cost;

            TemplatePlanner planner(corpus.kb, cfg.cost);
            RunRecord rec = run_recover(corpus.kb, task, rc, corpus.rules, planner);
            c.recover_cost = rec.total_cost;
            c.recover_calls = static_cast<int>(rec.planner_calls.size());

            BaselineVerifier verifier;
            verifier.detect_at_step = inj.trigger_step;
            for (const auto& [tid, f] : cfg.never_detect)
                if (tid == c.task && f == c.failure) verifier.detect_at_step.reset();
            BaselineReplanner replanner;
            RunRecord base = run_baseline(corpus.kb, task, rc, verifier, replanner);
            c.baseline_cost = base.total_cost;
            c.baseline_verifier_calls = base.verifier_calls;
            c.baseline_budget_halted = base.budget_halted;
        }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < std::max(1, cfg.workers); ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    report.cells = std::move(cells);
    return report;
}

inline std::string cost_csv(const CostReport& r) {
    std::ostringstream os;
    os << "task,failure,trigger_step,recover_cost,recover_calls,baseline_cost,baseline_verifier_calls,"
          "baseline_halted\n";
    for (const auto& c : r.cells) {
        os << c.task << ',' << c.failure << ',' << c.trigger_step << ','
           << harness_detail::fmt(c.recover_cost) << ',' << c.recover_calls << ',';
        if (c.baseline_budget_halted)
            os << "> " << harness_detail::fmt(r.budget);
        else
            os << harness_detail::fmt(c.baseline_cost);
        os << ',' << c.baseline_verifier_calls << ',' << (c.baseline_budget_halted ? 1 : 0) << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Text report: grid mirror of the outcome matrix plus aggregates. Aggregates
// are recomputed from the CSV content so the numbers cannot drift from the
// emitted cells.
// ---------------------------------------------------------------------------

inline std::string report_text(const std::string& matrix_csv_text, const std::string& cost_csv_text = "") {
    std::istringstream is(matrix_csv_text);
    std::string line;
    std::getline(is, line);  // header
    std::map<std::string, std::map<int, std::string>> grid;
    std::map<std::string, int> plan_sizes;
    int feasible = 0, completed = 0, recovered_only = 0;
    int easy_total = 0, easy_done = 0, complex_total = 0, complex_done = 0;
    std::map<std::string, bool> easy = {{"T1", true},  {"T2", true},  {"T3", true},  {"T4", true},
                                        {"T5", true},  {"T6", true},  {"T7", true},  {"T8", false},
                                        {"T9", false}, {"T10", false}, {"T11", false}, {"T12", false}};
    while (std::getline(is, line)) {
        auto cols = text::split(line, ',');
        if (cols.size() < 4) continue;
        const std::string& task = cols[0];
        int failure = std::stoi(cols[1]);
        const std::string& outcome = cols[3];
        std::string sym = ".";
        if (outcome == "RecoveredAndCompleted") sym = "#";
        else if (outcome == "RecoveredNotCompleted") sym = "*";
        else if (outcome != "infeasible") sym = "x";
        grid[task][failure] = sym;
        if (outcome == "infeasible") continue;
        ++feasible;
        bool e = easy.at(task);
        (e ? easy_total : complex_total) += 1;
        if (outcome == "RecoveredAndCompleted") {
            ++completed;
            (e ? easy_done : complex_done) += 1;
        } else if (outcome == "RecoveredNotCompleted") {
            ++recovered_only;
        }
    }

    std::ostringstream os;
    os << "Recovery matrix (template planner, rule verifier)\n";
    os << "  legend: # recovered and completed, * recovered only, x not recovered, . infeasible\n\n";
    os << "        ";
    for (int f = 1; f <= 12; ++f) os << std::setw(3) << f;
    os << "\n";
    for (const auto& [tid, _] : task_files()) {
        os << "  " << std::setw(4) << tid << "  ";
        for (int f = 1; f <= 12; ++f) {
            auto it = grid.find(tid);
            std::string sym = it != grid.end() && it->second.count(f) ? it->second.at(f) : ".";
            os << std::setw(3) << sym;
        }
        os << "\n";
    }
    os << "\n";
    auto pct = [](int num, int den) {
        std::ostringstream o;
        o << std::fixed << std::setprecision(1) << (den ? 100.0 * num / den : 0.0) << "%";
        return o.str();
    };
    os << "feasible pairs: " << feasible << "\n";
    os << "recovery rate: " << pct(completed + recovered_only, feasible) << "\n";
    os << "easy completion rate: " << pct(easy_done, easy_total) << "\n";
    os << "complex completion rate: " << pct(complex_done, complex_total) << "\n";
    os << "\nreference results reported for the GPT-4 pipeline on this benchmark:\n";
    os << "  recovery rate ~70%, easy completion 59%, complex completion 33%\n";
    os << "  safety: 100% of hazards identified, 93% recovered\n";

    if (!cost_csv_text.empty()) {
        std::istringstream cis(cost_csv_text);
        std::getline(cis, line);
        int pairs = 0, cheaper = 0, halted = 0;
        while (std::getline(cis, line)) {
            auto cols = text::split(line, ',');
            if (cols.size() < 8) continue;
            ++pairs;
            if (cols[7] == "1")
                ++halted;
            else if (std::stod(cols[3]) < std::stod(cols[5]))
                ++cheaper;
        }
        os << "\nCost study: " << pairs << " pairs; recover cheaper on " << cheaper
           << ", baseline budget-halted on " << halted << "\n";
    }
    return os.str();
}

}  // namespace recover
