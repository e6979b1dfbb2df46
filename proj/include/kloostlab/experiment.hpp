#pragma once

#include <cstdio>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "kloostlab/mod_arith.hpp"
#include "kloostlab/sequence.hpp"

namespace kloostlab {

enum class ExperimentKind {
    LongSum,
    ShortSum,
    DoubleSum,
    WeilCheck,
    Inverses,
    Discrepancy,
    Existence,
    Constants,
    Sweep,
};

ExperimentKind kind_from_name(const std::string& name); // ConfigError on unknown
std::string kind_name(ExperimentKind kind);

enum class OutputFormat { Csv, Jsonl };
OutputFormat format_from_name(const std::string& name); // ConfigError on unknown

// Everything a run needs, with defaults chosen so that only the fields the
// selected kind reads have to be set. Field meanings are documented with the
// config schema in the README.
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::LongSum;
    std::string sequence = "power:1.2"; // power:<c>[:theorem] | custom:<name>
    std::vector<u64> primes;
    u64 N = 1000;
    double K = 100.0;
    double L = 50.0;
    i64 x = 0;
    i64 y = 0;
    u64 pairs = 0; // 0 = use the explicit (x, y); else # of random pairs per prime
    double eps = 0.0;   // 0 = unset
    double kappa = 0.0; // 0 = unset
    i64 interval_K = 0;
    i64 interval_H = 2;
    u64 k = 1;
    u64 v_max = 8;
    u64 samples = 100;
    u64 set_size = 8;
    u64 bins = 10;
    u64 Kmax = 50;
    double c_et = 4.0;
    double log_base = 0.0; // 0 = natural log in the decomposition R
    bool weil_strict = false;
    std::string out;
    OutputFormat format = OutputFormat::Csv;
    u64 seed = 1;
    int threads = 0;
    bool strict = false;
    bool resume = false;
};

// Flat key = value text ('#'/';' comments, optional [section] headers which
// are cosmetic). Unknown keys are hard errors. `base` supplies the defaults
// being overridden, so CLI flags can be layered on top of a file.
ExperimentConfig parse_config_text(const std::string& text, ExperimentConfig base = {});
ExperimentConfig parse_config_file(const std::string& path, ExperimentConfig base = {});

// "power:1.2", "power:1.25:theorem", or "custom:<registered name>".
// The registry currently knows "half-square" (f = t^2/2).
SequenceSpec sequence_from_descriptor(const std::string& descriptor);

// One output record: an ordered list of named, typed fields. Within one run
// every row carries the same field names in the same order; wall_ms is
// always last.
class ResultRow {
public:
    using Value = std::variant<u64, i64, double, bool, std::string>;

    void add(std::string name, Value value) {
        fields_.emplace_back(std::move(name), std::move(value));
    }
    // Replace an existing field in place (schema stays fixed).
    void set(const std::string& field, Value value) {
        for (auto& [n, v] : fields_)
            if (n == field) {
                v = std::move(value);
                return;
            }
        throw FieldError("no such field: " + field);
    }
    std::size_t size() const { return fields_.size(); }
    const std::string& name(std::size_t i) const { return fields_[i].first; }
    const Value& value(std::size_t i) const { return fields_[i].second; }
    const Value* find(const std::string& field) const {
        for (const auto& [n, v] : fields_)
            if (n == field) return &v;
        return nullptr;
    }

private:
    std::vector<std::pair<std::string, Value>> fields_;
};

// CSV cell text for a value: integers in decimal, reals via %.17g, booleans
// as true/false.
std::string format_value(const ResultRow::Value& value);

// Streaming writer with per-row flush; path "-" selects stdout. With resume
// the file is appended to and `completed()` lists the grid_index values
// already present.
class RowSink {
public:
    RowSink(const std::string& path, OutputFormat format, bool resume);
    ~RowSink();
    RowSink(const RowSink&) = delete;
    RowSink& operator=(const RowSink&) = delete;

    const std::set<u64>& completed() const { return completed_; }
    void write(const ResultRow& row); // IoError on failure

private:
    std::FILE* file_ = nullptr;
    bool owns_file_ = false;
    bool need_header_ = true;
    OutputFormat format_ = OutputFormat::Csv;
    std::set<u64> completed_;
};

// Execute the configured experiment grid. Rows are returned in grid order;
// when a sink is given each row is also streamed (and grid points already in
// the sink are skipped). Row-level failures become status=error rows unless
// config.strict, which converts the first failure into a ComputeError.
std::vector<ResultRow> run(const ExperimentConfig& config, RowSink* sink = nullptr);

// Batch emission of precomputed rows. Refuses empty input before touching
// the filesystem.
void emit(const std::vector<ResultRow>& rows, const std::string& path, OutputFormat format);

// Two formatted columns extracted from rows, for external plotting.
std::vector<std::pair<std::string, std::string>> plotdata(const std::vector<ResultRow>& rows,
                                                          const std::string& x_field,
                                                          const std::string& y_field);

// Uniform draw from [0, n) by rejection; persists across calls via the
// generator state only, so sequences are reproducible from the seed.
u64 bounded_draw(std::mt19937_64& rng, u64 n);

} // namespace kloostlab
