#include "stq/functions.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "stq/error.hpp"
#include "stq/text.hpp"

namespace stq {

using nlohmann::json;

namespace {

std::optional<double> numeric_field(const TrajectoryPoint& p, Field f) {
    switch (f) {
    case Field::Ts:
        return static_cast<double>(p.ts);
    case Field::Lat:
        return p.lat;
    case Field::Lon:
        return p.lon;
    case Field::Alt:
        return p.alt;
    case Field::Value:
        return p.value;
    case Field::EntityId:
        break;
    }
    return std::nullopt;
}

bool compare(double lhs, Comparator cmp, double rhs) {
    switch (cmp) {
    case Comparator::Eq:
        return lhs == rhs;
    case Comparator::Ne:
        return lhs != rhs;
    case Comparator::Lt:
        return lhs < rhs;
    case Comparator::Le:
        return lhs <= rhs;
    case Comparator::Gt:
        return lhs > rhs;
    case Comparator::Ge:
        return lhs >= rhs;
    }
    return false;
}

bool matches(const std::vector<PredicateTerm>& where, const TrajectoryPoint& p) {
    for (const auto& term : where) {
        if (const auto* r = std::get_if<RegionTerm>(&term)) {
            if (!r->bbox.contains(p.lat, p.lon)) {
                return false;
            }
        } else if (const auto* t = std::get_if<TimeTerm>(&term)) {
            if (!t->interval.contains(p.ts)) {
                return false;
            }
        } else {
            const auto& f = std::get<FieldTerm>(term);
            if (f.field == Field::EntityId) {
                if (p.entity_id != std::get<std::string>(f.literal)) {
                    return false;
                }
                continue;
            }
            auto v = numeric_field(p, f.field);
            if (!v || !compare(*v, f.cmp, std::get<double>(f.literal))) {
                return false;
            }
        }
    }
    return true;
}

std::string group_key(const QueryAst& ast, const TrajectoryPoint& p, const GridConfig& grid) {
    if (!ast.group_by) {
        return {};
    }
    switch (*ast.group_by) {
    case GroupKey::Cell: {
        auto c = cell_of(p.lat, p.lon, grid);
        return std::to_string(c.ix) + "_" + std::to_string(c.iy);
    }
    case GroupKey::TimeBucket:
        return std::to_string(bucket_of(p.ts, grid));
    case GroupKey::Entity:
        return p.entity_id;
    }
    return {};
}

// Running state for one group; each selected aggregate owns its members.
struct Accumulator {
    std::int64_t count = 0;
    double sum = 0.0;
    double avg_sum = 0.0;
    std::int64_t avg_n = 0;
    Nullable min;
    Nullable max;

    void add_row(const QueryAst& ast, const TrajectoryPoint& p) {
        for (const auto& agg : ast.aggregates) {
            if (agg.kind == AggKind::CountAll) {
                ++count;
                continue;
            }
            if (agg.kind == AggKind::Count && *agg.field == Field::EntityId) {
                count += p.entity_id.empty() ? 0 : 1;
                continue;
            }
            auto v = numeric_field(p, *agg.field);
            if (!v) {
                continue;
            }
            switch (agg.kind) {
            case AggKind::Count:
                ++count;
                break;
            case AggKind::Sum:
                sum += *v;
                break;
            case AggKind::Avg:
                avg_sum += *v;
                ++avg_n;
                break;
            case AggKind::Min:
                min = min ? std::min(*min, *v) : *v;
                break;
            case AggKind::Max:
                max = max ? std::max(*max, *v) : *v;
                break;
            case AggKind::CountAll:
                break;
            }
        }
    }

    void add_partial(const Accumulator& other) {
        count += other.count;
        sum += other.sum;
        if (other.min) {
            min = min ? std::min(*min, *other.min) : *other.min;
        }
        if (other.max) {
            max = max ? std::max(*max, *other.max) : *other.max;
        }
    }

    GroupResult finish(const QueryAst& ast, std::string key) const {
        GroupResult g;
        g.key = std::move(key);
        for (const auto& agg : ast.aggregates) {
            switch (agg.kind) {
            case AggKind::CountAll:
            case AggKind::Count:
                g.count = count;
                break;
            case AggKind::Sum:
                g.sum = sum;
                break;
            case AggKind::Avg:
                g.avg = avg_n > 0 ? Nullable(avg_sum / static_cast<double>(avg_n)) : Nullable();
                break;
            case AggKind::Min:
                g.min = min;
                break;
            case AggKind::Max:
                g.max = max;
                break;
            }
        }
        return g;
    }
};

bool has_slot(const QueryAst& ast, AggKind kind) {
    return std::any_of(ast.aggregates.begin(), ast.aggregates.end(), [&](const Aggregate& a) {
        return a.kind == kind || (kind == AggKind::Count && a.kind == AggKind::CountAll);
    });
}

std::string format_partial(const QueryAst& ast, const std::string& key, const Accumulator& acc) {
    std::string out = key + ",";
    if (has_slot(ast, AggKind::Count)) {
        out += std::to_string(acc.count);
    }
    out += ',';
    if (has_slot(ast, AggKind::Sum)) {
        out += format_double(acc.sum);
    }
    out += ',';
    if (acc.min) {
        out += format_double(*acc.min);
    }
    out += ',';
    if (acc.max) {
        out += format_double(*acc.max);
    }
    return out;
}

Accumulator parse_partial(std::string_view line, std::string& key) {
    auto fields = split(line, ',');
    if (fields.size() != 5) {
        throw IntegrityError("malformed partial aggregate line: \"" + std::string(line) + "\"");
    }
    auto num = [&](std::string_view text) -> Nullable {
        if (text.empty()) {
            return std::nullopt;
        }
        auto v = parse_double(text);
        if (!v) {
            throw IntegrityError("malformed partial aggregate value: \"" + std::string(text) + "\"");
        }
        return v;
    };
    key = std::string(fields[0]);
    Accumulator acc;
    if (!fields[1].empty()) {
        auto c = parse_int64(fields[1]);
        if (!c) {
            throw IntegrityError("malformed partial count");
        }
        acc.count = *c;
    }
    acc.sum = num(fields[2]).value_or(0.0);
    acc.min = num(fields[3]);
    acc.max = num(fields[4]);
    return acc;
}

std::string format_projected(const TrajectoryPoint& p, const std::vector<Field>& fields) {
    auto keep = [&](Field f) { return std::find(fields.begin(), fields.end(), f) != fields.end(); };
    std::string out;
    if (keep(Field::EntityId)) {
        out += p.entity_id;
    }
    out += ',';
    if (keep(Field::Ts)) {
        out += std::to_string(p.ts);
    }
    out += ',';
    if (keep(Field::Lat)) {
        out += format_double(p.lat);
    }
    out += ',';
    if (keep(Field::Lon)) {
        out += format_double(p.lon);
    }
    out += ',';
    if (keep(Field::Alt) && p.alt) {
        out += format_double(*p.alt);
    }
    out += ',';
    if (keep(Field::Value) && p.value) {
        out += format_double(*p.value);
    }
    return out;
}

TrajectoryPoint parse_projected(std::string_view line) {
    auto fields = split(line, ',');
    if (fields.size() != 6) {
        throw IntegrityError("malformed projected row: \"" + std::string(line) + "\"");
    }
    auto num = [&](std::string_view text) -> Nullable {
        if (text.empty()) {
            return std::nullopt;
        }
        auto v = parse_double(text);
        if (!v) {
            throw IntegrityError("malformed projected value: \"" + std::string(text) + "\"");
        }
        return v;
    };
    TrajectoryPoint p;
    p.entity_id = std::string(fields[0]);
    if (!fields[1].empty()) {
        auto ts = parse_int64(fields[1]);
        if (!ts) {
            throw IntegrityError("malformed projected ts");
        }
        p.ts = *ts;
    }
    p.lat = num(fields[2]).value_or(0.0);
    p.lon = num(fields[3]).value_or(0.0);
    p.alt = num(fields[4]);
    p.value = num(fields[5]);
    return p;
}

Nullable sort_value(const GroupResult& g, const Aggregate& agg) {
    switch (agg.kind) {
    case AggKind::CountAll:
    case AggKind::Count:
        return g.count ? Nullable(static_cast<double>(*g.count)) : Nullable();
    case AggKind::Sum:
        return g.sum;
    case AggKind::Avg:
        return g.avg ? *g.avg : Nullable();
    case AggKind::Min:
        return g.min ? *g.min : Nullable();
    case AggKind::Max:
        return g.max ? *g.max : Nullable();
    }
    return std::nullopt;
}

// NULL sorts lowest; returns <0, 0, >0.
int compare_nullable(const Nullable& a, const Nullable& b) {
    if (a == b) {
        return 0;
    }
    if (!a) {
        return -1;
    }
    if (!b) {
        return 1;
    }
    return *a < *b ? -1 : 1;
}

void order_groups(const QueryAst& ast, std::vector<GroupResult>& groups) {
    bool desc = ast.order_by && ast.order_by->direction == Direction::Desc;
    const Aggregate* agg = ast.order_by ? std::get_if<Aggregate>(&ast.order_by->target) : nullptr;
    bool by_key = ast.order_by && std::holds_alternative<GroupKey>(ast.order_by->target);
    std::sort(groups.begin(), groups.end(), [&](const GroupResult& a, const GroupResult& b) {
        if (agg) {
            int c = compare_nullable(sort_value(a, *agg), sort_value(b, *agg));
            if (c != 0) {
                return desc ? c > 0 : c < 0;
            }
        }
        if (by_key && desc) {
            return a.key > b.key;
        }
        return a.key < b.key;
    });
}

void order_rows(const QueryAst& ast, std::vector<TrajectoryPoint>& rows) {
    const Field* field = ast.order_by ? std::get_if<Field>(&ast.order_by->target) : nullptr;
    bool desc = ast.order_by && ast.order_by->direction == Direction::Desc;
    std::sort(rows.begin(), rows.end(), [&](const TrajectoryPoint& a, const TrajectoryPoint& b) {
        if (field) {
            int c = 0;
            if (*field == Field::EntityId) {
                c = a.entity_id.compare(b.entity_id);
                c = c < 0 ? -1 : (c > 0 ? 1 : 0);
            } else {
                c = compare_nullable(numeric_field(a, *field), numeric_field(b, *field));
            }
            if (c != 0) {
                return desc ? c > 0 : c < 0;
            }
        }
        return a < b;
    });
}

template <class T>
void apply_limit(const QueryAst& ast, std::vector<T>& items) {
    if (ast.limit && items.size() > static_cast<std::size_t>(*ast.limit)) {
        items.resize(static_cast<std::size_t>(*ast.limit));
    }
}

QueryResult finish_aggregate(const QueryAst& ast, const std::map<std::string, Accumulator>& accs) {
    QueryResult out{ResultKind::Aggregate, ast.order_by.has_value(), {}, {}};
    for (const auto& [key, acc] : accs) {
        out.groups.push_back(acc.finish(ast, key));
    }
    if (!ast.group_by && out.groups.empty()) {
        out.groups.push_back(Accumulator{}.finish(ast, ""));
    }
    order_groups(ast, out.groups);
    apply_limit(ast, out.groups);
    return out;
}

QueryResult finish_rows(const QueryAst& ast, std::vector<TrajectoryPoint> rows) {
    order_rows(ast, rows);
    apply_limit(ast, rows);
    return QueryResult{ResultKind::Rows, ast.order_by.has_value(), std::move(rows), {}};
}

QueryResult empty_result(const QueryAst& ast) {
    if (ast.all_rows()) {
        return finish_rows(ast, {});
    }
    return finish_aggregate(ast, {});
}

std::string read_input(const BlobStore& store, const BlobKey& key) {
    try {
        return store.get(key);
    } catch (const NotFoundError&) {
        throw IntegrityError("missing partial result " + key.str());
    }
}

} // namespace

BlobKey worker_map(const Subquery& sq, BlobStore& store) {
    if (sq.stage != Stage::Map || !sq.shard) {
        throw InvocationError("worker_map needs a MAP subquery");
    }
    auto blob = store.get(shard_blob_key(*sq.shard));
    auto contract = map_output_contract(sq.ast);

    std::string out;
    std::map<std::string, Accumulator> partials;
    std::size_t line_no = 0;
    for (auto line : split_lines(blob)) {
        auto p = parse_record(line, ++line_no);
        if (!matches(sq.ast.where, p)) {
            continue;
        }
        switch (contract.kind) {
        case EmissionKind::Rows:
            out += format_record(p);
            out += '\n';
            break;
        case EmissionKind::ProjectedRows:
            out += format_projected(p, contract.fields);
            out += '\n';
            break;
        case EmissionKind::PartialAggregates:
            partials[group_key(sq.ast, p, sq.grid)].add_row(sq.ast, p);
            break;
        }
    }
    for (const auto& [key, acc] : partials) {
        out += format_partial(sq.ast, key, acc);
        out += '\n';
    }
    store.put(sq.output_key, out);
    return sq.output_key;
}

BlobKey worker_reduce(const Subquery& sq, BlobStore& store) {
    if (sq.stage != Stage::Reduce) {
        throw InvocationError("worker_reduce needs a REDUCE subquery");
    }
    auto contract = map_output_contract(sq.ast);
    QueryResult result;
    if (contract.kind == EmissionKind::ProjectedRows && sq.ast.all_rows()) {
        std::vector<TrajectoryPoint> rows;
        for (const auto& key : sq.input_keys) {
            auto blob = read_input(store, key);
            for (auto line : split_lines(blob)) {
                rows.push_back(parse_projected(line));
            }
        }
        result = finish_rows(sq.ast, std::move(rows));
    } else {
        std::map<std::string, Accumulator> accs;
        for (const auto& key : sq.input_keys) {
            auto blob = read_input(store, key);
            for (auto line : split_lines(blob)) {
                if (contract.kind == EmissionKind::PartialAggregates) {
                    std::string group;
                    auto partial = parse_partial(line, group);
                    accs[group].add_partial(partial);
                } else {
                    auto p = parse_projected(line);
                    accs[group_key(sq.ast, p, sq.grid)].add_row(sq.ast, p);
                }
            }
        }
        result = finish_aggregate(sq.ast, accs);
    }
    store.put(sq.output_key, to_json(result));
    return sq.output_key;
}

QueryResult merge_results(const WavePlan& plan, BlobStore& store) {
    QueryResult result;
    if (plan.waves.empty()) {
        result = empty_result(plan.ast);
    } else if (plan.merge_kind == MergeKind::Concat) {
        std::vector<TrajectoryPoint> rows;
        for (const auto& sq : plan.waves.front().subqueries) {
            std::size_t line_no = 0;
            auto blob = read_input(store, sq.output_key);
            for (auto line : split_lines(blob)) {
                rows.push_back(parse_record(line, ++line_no));
            }
        }
        result = finish_rows(plan.ast, std::move(rows));
    } else {
        const auto& last = plan.waves.back();
        if (last.stage != Stage::Reduce || last.subqueries.size() != 1) {
            throw IntegrityError("REDUCE_FINAL plan without a single-reducer wave");
        }
        result = result_from_json(read_input(store, last.subqueries.front().output_key));
    }
    store.put(final_result_key(plan.query_id), to_json(result));
    return result;
}

std::string serialize(const WavePlan& plan) {
    json waves = json::array();
    for (const auto& w : plan.waves) {
        json subqueries = json::array();
        for (const auto& sq : w.subqueries) {
            subqueries.push_back(serialize(sq));
        }
        waves.push_back({{"stage", to_string(w.stage)}, {"subqueries", std::move(subqueries)}});
    }
    return json{{"query_id", plan.query_id},
                {"query", pretty(plan.ast)},
                {"grid", {{"cell_deg", plan.grid.cell_deg},
                          {"bucket_seconds", plan.grid.bucket_seconds}}},
                {"merge_kind", plan.merge_kind == MergeKind::Concat ? "CONCAT" : "REDUCE_FINAL"},
                {"waves", std::move(waves)}}
        .dump();
}

WavePlan deserialize_plan(std::string_view payload) {
    try {
        auto j = json::parse(payload);
        WavePlan plan;
        plan.query_id = j.at("query_id").get<std::string>();
        plan.ast = parse(j.at("query").get<std::string>());
        plan.grid = GridConfig::make(j.at("grid").at("cell_deg").get<double>(),
                                     j.at("grid").at("bucket_seconds").get<std::int64_t>());
        plan.tag = classify(plan.ast).overall;
        plan.merge_kind = j.at("merge_kind").get<std::string>() == "CONCAT" ? MergeKind::Concat
                                                                             : MergeKind::ReduceFinal;
        for (const auto& w : j.at("waves")) {
            Wave wave{w.at("stage").get<std::string>() == "MAP" ? Stage::Map : Stage::Reduce, {}};
            for (const auto& sq : w.at("subqueries")) {
                wave.subqueries.push_back(deserialize_subquery(sq.get<std::string>()));
            }
            plan.waves.push_back(std::move(wave));
        }
        return plan;
    } catch (const json::exception& e) {
        throw IntegrityError(std::string("malformed plan payload: ") + e.what());
    }
}

void register_functions(Runtime& runtime) {
    runtime.register_function(kWorkerFunction, [](std::string_view payload, BlobStore& store) {
        auto sq = deserialize_subquery(payload);
        auto key = sq.stage == Stage::Map ? worker_map(sq, store) : worker_reduce(sq, store);
        return key.str();
    });
    runtime.register_function(kMergerFunction, [](std::string_view payload, BlobStore& store) {
        return to_json(merge_results(deserialize_plan(payload), store));
    });
}

const char* to_string(QueryState state) {
    switch (state) {
    case QueryState::Pending:
        return "PENDING";
    case QueryState::Running:
        return "RUNNING";
    case QueryState::Done:
        return "DONE";
    case QueryState::Failed:
        return "FAILED";
    }
    return "?";
}

std::string status_to_json(const QueryStatus& status) {
    json progress = json::array();
    for (const auto& w : status.wave_progress) {
        progress.push_back(
            {{"stage", to_string(w.stage)}, {"completed", w.completed}, {"total", w.total}});
    }
    json j = {{"query_id", status.query_id},
              {"state", to_string(status.state)},
              {"wave_progress", std::move(progress)}};
    if (status.state == QueryState::Done && status.result) {
        j["result"] = json::parse(to_json(*status.result));
    }
    if (status.state == QueryState::Failed && status.error) {
        j["error"] = *status.error;
    }
    return j.dump();
}

void StatusBoard::publish(const QueryStatus& status) {
    {
        std::lock_guard lock(mu_);
        auto it = statuses_.find(status.query_id);
        if (it != statuses_.end()) {
            const auto& old = it->second;
            if (old.terminal() || status.state < old.state) {
                return;
            }
            it->second = status;
        } else {
            statuses_.emplace(status.query_id, status);
        }
    }
    cv_.notify_all();
}

std::optional<QueryStatus> StatusBoard::get(const std::string& query_id) const {
    std::lock_guard lock(mu_);
    auto it = statuses_.find(query_id);
    if (it == statuses_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::optional<QueryStatus> StatusBoard::wait_terminal(const std::string& query_id,
                                                      std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] {
        auto it = statuses_.find(query_id);
        return it == statuses_.end() || it->second.terminal();
    });
    auto it = statuses_.find(query_id);
    if (it == statuses_.end()) {
        return std::nullopt;
    }
    return it->second;
}

namespace {

struct DriveOutcome {
    std::vector<std::string> outputs;
    std::optional<std::string> error;
};

// Runs payloads as one wave, then re-drives the failed ones with fresh
// attempt numbers up to `redrive_limit` more rounds.
DriveOutcome drive(Runtime& runtime, const std::string& function_id,
                   const std::vector<std::string>& payloads, int wave_index, int redrive_limit,
                   const std::function<void(int)>& on_progress) {
    DriveOutcome out;
    out.outputs.resize(payloads.size());
    std::vector<std::size_t> pending(payloads.size());
    for (std::size_t i = 0; i < pending.size(); ++i) {
        pending[i] = i;
    }
    int completed = 0;
    int first_attempt = 1;
    std::string last_error;
    for (int round = 0; round <= redrive_limit && !pending.empty(); ++round) {
        std::vector<std::string> batch;
        batch.reserve(pending.size());
        for (auto i : pending) {
            batch.push_back(payloads[i]);
        }
        auto results = runtime.invoke_wave(function_id, batch, wave_index, first_attempt);
        std::vector<std::size_t> failed;
        for (std::size_t k = 0; k < results.size(); ++k) {
            if (results[k].outcome == Outcome::Success) {
                out.outputs[pending[k]] = std::move(results[k].output);
                ++completed;
            } else {
                failed.push_back(pending[k]);
                if (last_error.empty()) {
                    last_error = results[k].error;
                }
            }
        }
        on_progress(completed);
        pending = std::move(failed);
        first_attempt += runtime.config().retry_limit + 1;
    }
    if (!pending.empty()) {
        out.error = std::to_string(pending.size()) + " " + function_id +
                    " invocation(s) failed in wave " + std::to_string(wave_index) + ": " +
                    last_error;
    }
    return out;
}

} // namespace

QueryStatus coordinator_run(const std::string& query_id, const QueryAst& ast,
                            const ShardManifest& manifest, Runtime& runtime,
                            const CoordinatorOptions& options, StatusBoard* board) {
    QueryStatus status;
    status.query_id = query_id;
    status.state = QueryState::Running;
    auto publish = [&] {
        if (board) {
            board->publish(status);
        }
    };
    auto fail = [&](std::string msg) {
        status.state = QueryState::Failed;
        status.error = std::move(msg);
        publish();
        return status;
    };
    publish();
    try {
        auto p = plan(ast, manifest, query_id);
        for (const auto& w : p.waves) {
            status.wave_progress.push_back(
                WaveProgress{w.stage, 0, static_cast<int>(w.subqueries.size())});
        }
        publish();
        for (std::size_t wi = 0; wi < p.waves.size(); ++wi) {
            std::vector<std::string> payloads;
            for (const auto& sq : p.waves[wi].subqueries) {
                payloads.push_back(serialize(sq));
            }
            auto outcome = drive(runtime, kWorkerFunction, payloads, static_cast<int>(wi),
                                 options.wave_redrive_limit, [&](int completed) {
                                     status.wave_progress[wi].completed = completed;
                                     publish();
                                 });
            if (outcome.error) {
                return fail(*outcome.error);
            }
        }
        auto merged = drive(runtime, kMergerFunction, {serialize(p)},
                            static_cast<int>(p.waves.size()), options.wave_redrive_limit,
                            [](int) {});
        if (merged.error) {
            return fail(*merged.error);
        }
        status.result = result_from_json(merged.outputs.front());
        status.result_key = final_result_key(query_id);
        status.state = QueryState::Done;
        publish();
        return status;
    } catch (const std::exception& e) {
        return fail(e.what());
    }
}

QueryEngine::QueryEngine(BlobStore& store, RuntimeConfig config, CoordinatorOptions options)
    : store_(store), runtime_(config, store), options_(options) {
    register_functions(runtime_);
}

std::string QueryEngine::next_query_id() {
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::system_clock::now().time_since_epoch())
                  .count();
    return "q" + std::to_string(ms) + "-" + std::to_string(counter_++);
}

QueryStatus QueryEngine::run(std::string_view query_text) {
    auto ast = parse(query_text);
    return run(ast, next_query_id());
}

QueryStatus QueryEngine::run(const QueryAst& ast, const std::string& query_id) {
    QueryStatus pending{query_id, QueryState::Pending, {}, {}, {}, {}};
    board_.publish(pending);
    try {
        validate_query_id(query_id);
        auto manifest = load_manifest(store_);
        return coordinator_run(query_id, ast, manifest, runtime_, options_, &board_);
    } catch (const std::exception& e) {
        QueryStatus failed{query_id, QueryState::Failed, {}, e.what(), {}, {}};
        board_.publish(failed);
        return failed;
    }
}

} // namespace stq
