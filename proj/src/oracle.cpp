#include "ktnas/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "ktnas/csv.hpp"
#include "ktnas/errors.hpp"

namespace ktnas {

struct TabularOracle::Table {
    SearchSpaceSpec space;
    std::vector<std::string> keys;
    std::unordered_map<std::string, std::size_t> index;
    std::vector<std::vector<double>> scores;  // [task][key]
    OracleMetadata meta;
    std::vector<std::size_t> optimum;  // [task] -> key index
};

TabularOracle::TabularOracle(SearchSpaceSpec space, std::vector<std::string> keys,
                             std::vector<std::vector<double>> scores, OracleMetadata meta) {
    space.validate();
    if (keys.empty()) throw DataError("fitness table has no keys");
    if (scores.empty()) throw DataError("fitness table has no tasks");

    auto table = std::make_shared<Table>();
    table->space = std::move(space);
    table->keys = std::move(keys);
    table->scores = std::move(scores);
    table->meta = std::move(meta);

    table->index.reserve(table->keys.size());
    for (std::size_t i = 0; i < table->keys.size(); ++i) {
        decode(table->keys[i], table->space);  // must be a genotype of this space
        if (!table->index.emplace(table->keys[i], i).second)
            throw DataError("duplicate key '" + table->keys[i] + "' in fitness table");
    }
    for (std::size_t task = 0; task < table->scores.size(); ++task) {
        const auto& column = table->scores[task];
        if (column.size() != table->keys.size())
            throw DataError("task " + std::to_string(task) + " has " + std::to_string(column.size()) +
                            " scores for " + std::to_string(table->keys.size()) + " keys");
        for (std::size_t i = 0; i < column.size(); ++i)
            if (!std::isfinite(column[i]))
                throw DataError("non-finite fitness for key '" + table->keys[i] + "' on task " +
                                std::to_string(task));
        std::size_t best = 0;
        for (std::size_t i = 1; i < column.size(); ++i) {
            if (column[i] > column[best] ||
                (column[i] == column[best] && table->keys[i] < table->keys[best]))
                best = i;
        }
        table->optimum.push_back(best);
    }

    table_ = std::move(table);
    serve_order_.assign(table_->scores.size(), std::vector<std::int64_t>(table_->keys.size(), 0));
    served_count_.assign(table_->scores.size(), 0);
}

namespace {

std::size_t key_index_or_throw(const std::unordered_map<std::string, std::size_t>& index,
                               const std::string& encoding) {
    auto it = index.find(encoding);
    if (it == index.end()) throw DataError("architecture '" + encoding + "' is not in the fitness table");
    return it->second;
}

void check_task(std::size_t task_count, int task) {
    if (task < 0 || static_cast<std::size_t>(task) >= task_count)
        throw ContractError("task index " + std::to_string(task) + " out of range");
}

}  // namespace

double TabularOracle::evaluate(int task, const std::string& encoding) {
    check_task(table_->scores.size(), task);
    const std::size_t key = key_index_or_throw(table_->index, encoding);
    auto& order = serve_order_[static_cast<std::size_t>(task)][key];
    if (order == 0) order = ++served_count_[static_cast<std::size_t>(task)];
    return table_->scores[static_cast<std::size_t>(task)][key];
}

double TabularOracle::peek(int task, const std::string& encoding) const {
    check_task(table_->scores.size(), task);
    return table_->scores[static_cast<std::size_t>(task)][key_index_or_throw(table_->index, encoding)];
}

long TabularOracle::unique_evaluations(int task) const {
    check_task(table_->scores.size(), task);
    return served_count_[static_cast<std::size_t>(task)];
}

std::optional<long> TabularOracle::serve_index(int task, const std::string& encoding) const {
    check_task(table_->scores.size(), task);
    const std::size_t key = key_index_or_throw(table_->index, encoding);
    const auto order = serve_order_[static_cast<std::size_t>(task)][key];
    if (order == 0) return std::nullopt;
    return static_cast<long>(order);
}

const std::string& TabularOracle::optimum_encoding(int task) const {
    check_task(table_->scores.size(), task);
    return table_->keys[table_->optimum[static_cast<std::size_t>(task)]];
}

double TabularOracle::optimum_fitness(int task) const {
    check_task(table_->scores.size(), task);
    return table_->scores[static_cast<std::size_t>(task)][table_->optimum[static_cast<std::size_t>(task)]];
}

int TabularOracle::num_tasks() const { return static_cast<int>(table_->scores.size()); }
std::size_t TabularOracle::num_keys() const { return table_->keys.size(); }
const SearchSpaceSpec& TabularOracle::space() const { return table_->space; }
const std::vector<std::string>& TabularOracle::keys() const { return table_->keys; }
const OracleMetadata& TabularOracle::metadata() const { return table_->meta; }

TabularOracle TabularOracle::fresh_clone() const {
    TabularOracle clone = *this;
    for (auto& column : clone.serve_order_) std::fill(column.begin(), column.end(), 0);
    std::fill(clone.served_count_.begin(), clone.served_count_.end(), 0);
    return clone;
}

namespace {

SearchSpaceSpec infer_space(const std::vector<std::string>& keys, const std::string& path) {
    std::size_t genes = 1;
    for (char c : keys.front())
        if (c == ':') ++genes;
    int num_nodes = 2;
    while (static_cast<std::size_t>(num_nodes * (num_nodes - 1) / 2) < genes) ++num_nodes;
    if (static_cast<std::size_t>(num_nodes * (num_nodes - 1) / 2) != genes)
        throw DataError(path + ": " + std::to_string(genes) + " genes do not form a complete cell DAG");
    int max_op = 0;
    for (const auto& key : keys) {
        std::size_t pos = 0;
        while (pos <= key.size()) {
            std::size_t next = key.find(':', pos);
            if (next == std::string::npos) next = key.size();
            max_op = std::max(max_op, static_cast<int>(parse_long(key.substr(pos, next - pos), path)));
            if (next == key.size()) break;
            pos = next + 1;
        }
    }
    return SearchSpaceSpec::generic(num_nodes, max_op + 1);
}

}  // namespace

TabularOracle load_tabular(const std::string& path, const std::vector<int>& negate_tasks) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw DataError("cannot read '" + path + "'");

    std::string line;
    if (!std::getline(file, line)) throw DataError(path + ": empty file");
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "encoding")
        throw DataError(path + ":1: header must start with 'encoding' and list at least one task");
    for (std::size_t i = 1; i < header.size(); ++i)
        if (header[i] != "task_" + std::to_string(i - 1))
            throw DataError(path + ":1: expected column 'task_" + std::to_string(i - 1) + "', got '" +
                            header[i] + "'");
    const std::size_t n_tasks = header.size() - 1;

    std::vector<std::string> keys;
    std::vector<std::vector<double>> scores(n_tasks);
    int line_no = 1;
    while (std::getline(file, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
        keys.push_back(fields[0]);
        for (std::size_t task = 0; task < n_tasks; ++task) {
            double value = parse_double(fields[task + 1], path + ":" + std::to_string(line_no));
            if (!std::isfinite(value))
                throw DataError(path + ":" + std::to_string(line_no) + ": non-finite fitness for key '" +
                                fields[0] + "'");
            scores[task].push_back(value);
        }
    }
    if (keys.empty()) throw DataError(path + ": no data rows");

    OracleMetadata meta;
    meta.source = path;
    for (int task : negate_tasks) {
        if (task < 0 || static_cast<std::size_t>(task) >= n_tasks)
            throw DataError("cannot negate task " + std::to_string(task) + ": file has " +
                            std::to_string(n_tasks) + " tasks");
        for (auto& value : scores[static_cast<std::size_t>(task)]) value = -value;
        meta.negated_tasks.push_back(task);
    }
    auto space = infer_space(keys, path);
    return TabularOracle(std::move(space), std::move(keys), std::move(scores), std::move(meta));
}

void write_tabular(const TabularOracle& oracle, const std::string& path) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw DataError("cannot write '" + path + "'");
    file << "encoding";
    for (int task = 0; task < oracle.num_tasks(); ++task) file << ",task_" << task;
    file << '\n';
    for (const auto& key : oracle.keys()) {
        file << key;
        for (int task = 0; task < oracle.num_tasks(); ++task) file << ',' << format_double(oracle.peek(task, key));
        file << '\n';
    }
}

namespace {

// Merge sort counting strictly-decreasing pairs.
std::uint64_t count_inversions(std::vector<double>& values, std::vector<double>& scratch,
                               std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::uint64_t count = count_inversions(values, scratch, lo, mid) + count_inversions(values, scratch, mid, hi);
    std::size_t left = lo, right = mid, out = lo;
    while (left < mid && right < hi) {
        if (values[right] < values[left]) {
            count += mid - left;  // every remaining left element beats values[right]
            scratch[out++] = values[right++];
        } else {
            scratch[out++] = values[left++];
        }
    }
    while (left < mid) scratch[out++] = values[left++];
    while (right < hi) scratch[out++] = values[right++];
    std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo), scratch.begin() + static_cast<std::ptrdiff_t>(hi),
              values.begin() + static_cast<std::ptrdiff_t>(lo));
    return count;
}

std::uint64_t tie_pairs(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    std::uint64_t pairs = 0;
    std::size_t run = 1;
    for (std::size_t i = 1; i <= values.size(); ++i) {
        if (i < values.size() && values[i] == values[i - 1]) {
            ++run;
        } else {
            pairs += static_cast<std::uint64_t>(run) * (run - 1) / 2;
            run = 1;
        }
    }
    return pairs;
}

}  // namespace

double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ContractError("tau-b needs equal-length inputs");
    const std::size_t n = x.size();
    if (n < 2) throw ContractError("tau-b needs at least two observations");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (x[a] != x[b]) return x[a] < x[b];
        return y[a] < y[b];
    });

    // Ties in x, and joint ties, from runs of the x-sorted sequence.
    std::uint64_t n1 = 0, n3 = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && x[order[j]] == x[order[i]]) ++j;
        const std::uint64_t run = j - i;
        n1 += run * (run - 1) / 2;
        std::size_t k = i;
        while (k < j) {
            std::size_t l = k;
            while (l < j && y[order[l]] == y[order[k]]) ++l;
            const std::uint64_t joint = l - k;
            n3 += joint * (joint - 1) / 2;
            k = l;
        }
        i = j;
    }

    std::vector<double> y_in_x_order(n);
    for (std::size_t idx = 0; idx < n; ++idx) y_in_x_order[idx] = y[order[idx]];
    std::vector<double> scratch(n);
    const std::uint64_t discordant = count_inversions(y_in_x_order, scratch, 0, n);

    const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    const std::uint64_t n2 = tie_pairs(y);
    if (n0 == n1 || n0 == n2) throw ContractError("tau-b undefined for a constant input");

    const double strict = static_cast<double>(n0 - n1 - n2 + n3);  // pairs untied in both
    const double nc_minus_nd = strict - 2.0 * static_cast<double>(discordant);
    return nc_minus_nd / std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
}

double kendall_tau(const TabularOracle& oracle, int task_a, int task_b) {
    std::vector<double> a, b;
    a.reserve(oracle.num_keys());
    b.reserve(oracle.num_keys());
    for (const auto& key : oracle.keys()) {
        a.push_back(oracle.peek(task_a, key));
        b.push_back(oracle.peek(task_b, key));
    }
    return kendall_tau_b(a, b);
}

SynthesizedLandscape synthesize_landscape(const LandscapeSpec& spec, std::uint64_t seed) {
    spec.space.validate();
    if (spec.n_tasks < 1) throw ContractError("landscape needs at least one task");
    if (spec.target_tau < -1.0 || spec.target_tau > 1.0)
        throw ContractError("target rank correlation outside [-1, 1]");

    const auto archs = enumerate_space(spec.space, spec.enumeration_cap);
    const std::size_t n = archs.size();
    const int edges = spec.space.edge_count();
    const int ops = spec.space.num_ops();

    Rng rng(seed);

    // Shared score: one normal contribution per (edge, op), summed over the
    // genotype and scaled to unit variance. Draw order: edge-major.
    std::vector<std::vector<double>> contribution(static_cast<std::size_t>(edges),
                                                  std::vector<double>(static_cast<std::size_t>(ops)));
    for (auto& per_edge : contribution)
        for (auto& value : per_edge) value = rng.normal();
    const double scale = 1.0 / std::sqrt(static_cast<double>(edges));
    std::vector<double> shared(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int e = 0; e < edges; ++e)
            sum += contribution[static_cast<std::size_t>(e)][static_cast<std::size_t>(archs[i].genes[static_cast<std::size_t>(e)])];
        shared[i] = sum * scale;
    }

    std::vector<std::vector<double>> noise(static_cast<std::size_t>(spec.n_tasks), std::vector<double>(n));
    for (auto& column : noise)
        for (auto& value : column) value = rng.normal();

    auto task_scores = [&](double lambda) {
        std::vector<std::vector<double>> scores(static_cast<std::size_t>(spec.n_tasks), std::vector<double>(n));
        for (int task = 0; task < spec.n_tasks; ++task) {
            const double sign = (spec.target_tau < 0.0 && task > 0) ? -1.0 : 1.0;
            for (std::size_t i = 0; i < n; ++i)
                scores[static_cast<std::size_t>(task)][i] =
                    lambda * sign * shared[i] + (1.0 - lambda) * noise[static_cast<std::size_t>(task)][i];
        }
        return scores;
    };

    // Mean tau of every task against task 0; monotone in lambda.
    auto realized = [&](const std::vector<std::vector<double>>& scores) {
        double sum = 0.0;
        for (int task = 1; task < spec.n_tasks; ++task)
            sum += kendall_tau_b(scores[0], scores[static_cast<std::size_t>(task)]);
        return spec.n_tasks > 1 ? sum / (spec.n_tasks - 1) : 1.0;
    };

    double lambda;
    if (spec.lambda_override) {
        lambda = *spec.lambda_override;
        if (lambda < 0.0 || lambda > 1.0) throw ContractError("lambda outside [0, 1]");
    } else if (spec.n_tasks == 1) {
        lambda = 1.0;
    } else {
        const double at_zero = realized(task_scores(0.0));
        const double at_one = realized(task_scores(1.0));
        const double lo_tau = std::min(at_zero, at_one), hi_tau = std::max(at_zero, at_one);
        if (spec.target_tau < lo_tau - spec.tau_tolerance || spec.target_tau > hi_tau + spec.tau_tolerance)
            throw DataError("target tau " + format_double(spec.target_tau) + " unreachable; achievable range [" +
                            format_double(lo_tau) + ", " + format_double(hi_tau) + "]");
        const bool increasing = at_one >= at_zero;
        double lo = 0.0, hi = 1.0;
        for (int iter = 0; iter < 40; ++iter) {
            const double mid = 0.5 * (lo + hi);
            const double value = realized(task_scores(mid));
            if ((value < spec.target_tau) == increasing)
                lo = mid;
            else
                hi = mid;
        }
        lambda = 0.5 * (lo + hi);
    }

    auto scores = task_scores(lambda);
    std::vector<std::vector<double>> tau(static_cast<std::size_t>(spec.n_tasks),
                                         std::vector<double>(static_cast<std::size_t>(spec.n_tasks), 1.0));
    for (int a = 0; a < spec.n_tasks; ++a)
        for (int b = a + 1; b < spec.n_tasks; ++b) {
            const double value = kendall_tau_b(scores[static_cast<std::size_t>(a)], scores[static_cast<std::size_t>(b)]);
            tau[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = value;
            tau[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = value;
        }
    if (!spec.lambda_override && spec.n_tasks > 1) {
        double mean_tau = 0.0;
        for (int task = 1; task < spec.n_tasks; ++task) mean_tau += tau[0][static_cast<std::size_t>(task)];
        mean_tau /= (spec.n_tasks - 1);
        if (std::abs(mean_tau - spec.target_tau) > spec.tau_tolerance)
            throw DataError("landscape search ended at " + format_double(mean_tau) + " for target " +
                            format_double(spec.target_tau) + "; try another seed");
    }

    std::vector<std::string> keys;
    keys.reserve(n);
    for (const auto& arch : archs) keys.push_back(encode(arch));

    OracleMetadata meta;
    meta.source = "synthesized";
    meta.seed = seed;
    meta.lambda = lambda;
    meta.realized_tau = tau;

    SynthesizedLandscape result{TabularOracle(spec.space, std::move(keys), std::move(scores), std::move(meta)),
                                lambda, std::move(tau)};
    return result;
}

}  // namespace ktnas
