#include "aqora/relstore.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "aqora/rng.hpp"

namespace aqora {

using nlohmann::json;

// --- schema ----------------------------------------------------------------

static ColumnKind parse_kind(const std::string& s, const std::string& where) {
    if (s == "key") return ColumnKind::Key;
    if (s == "fk") return ColumnKind::ForeignKey;
    if (s == "attr") return ColumnKind::Attribute;
    throw ConfigError("unknown column kind '" + s + "' in " + where);
}

SchemaSpec SchemaSpec::from_json_text(const std::string& text) {
    json j = json::parse(text);
    SchemaSpec spec;
    for (const auto& jt : j.at("tables")) {
        TableSpec t;
        t.name = jt.at("name").get<std::string>();
        t.rows = jt.at("rows").get<uint64_t>();
        for (const auto& jc : jt.at("columns")) {
            ColumnSpec c;
            c.name = jc.at("name").get<std::string>();
            c.kind = parse_kind(jc.at("kind").get<std::string>(), t.name);
            if (c.kind == ColumnKind::ForeignKey) {
                c.references = jc.at("references").get<std::string>();
                c.zipf = jc.value("zipf", 0.0);
                c.null_fraction = jc.value("null_fraction", 0.0);
            } else if (c.kind == ColumnKind::Attribute) {
                c.domain = jc.value("domain", int64_t{1000});
            }
            t.columns.push_back(std::move(c));
        }
        spec.tables.push_back(std::move(t));
    }
    return spec;
}

SchemaSpec SchemaSpec::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open schema file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_text(text);
}

int Relation::column_index(const std::string& column_name) const {
    for (size_t i = 0; i < columns.size(); ++i)
        if (columns[i].name == column_name) return static_cast<int>(i);
    throw ConfigError("unknown column '" + column_name + "' in table '" + name + "'");
}

int table_index(const Catalog& catalog, const std::string& name) {
    for (size_t i = 0; i < catalog.size(); ++i)
        if (catalog[i].name == name) return static_cast<int>(i);
    throw ConfigError("unknown table '" + name + "'");
}

// --- join graph -------------------------------------------------------------

bool JoinGraph::contains(int table) const {
    return std::find(tables.begin(), tables.end(), table) != tables.end();
}

std::vector<Predicate> JoinGraph::predicates_for(int table) const {
    std::vector<Predicate> out;
    for (const auto& p : predicates)
        if (p.table == table) out.push_back(p);
    return out;
}

uint64_t JoinGraph::all_tables_mask() const {
    uint64_t m = 0;
    for (int t : tables) m |= uint64_t{1} << t;
    return m;
}

bool JoinGraph::connected(uint64_t subset_mask) const {
    if (subset_mask == 0) return false;
    int first = std::countr_zero(subset_mask);
    uint64_t seen = uint64_t{1} << first;
    bool grew = true;
    while (grew) {
        grew = false;
        for (const auto& e : edges) {
            uint64_t a = uint64_t{1} << e.left.table;
            uint64_t b = uint64_t{1} << e.right.table;
            if ((a | b) & ~subset_mask) continue;
            if ((seen & a) && !(seen & b)) { seen |= b; grew = true; }
            if ((seen & b) && !(seen & a)) { seen |= a; grew = true; }
        }
    }
    return seen == subset_mask;
}

// --- generation --------------------------------------------------------------

static void validate_schema(const SchemaSpec& schema) {
    std::unordered_set<std::string> names;
    for (const auto& t : schema.tables)
        if (!names.insert(t.name).second)
            throw ConfigError("duplicate table name '" + t.name + "'");

    auto find_table = [&](const std::string& n) -> const TableSpec* {
        for (const auto& t : schema.tables)
            if (t.name == n) return &t;
        return nullptr;
    };
    for (const auto& t : schema.tables) {
        std::unordered_set<std::string> cols;
        for (const auto& c : t.columns) {
            if (!cols.insert(c.name).second)
                throw ConfigError("duplicate column '" + c.name + "' in table '" + t.name + "'");
            if (c.kind != ColumnKind::ForeignKey) continue;
            auto dot = c.references.find('.');
            if (dot == std::string::npos)
                throw ConfigError("foreign key " + t.name + "." + c.name +
                                  " must reference table.column, got '" + c.references + "'");
            std::string rt = c.references.substr(0, dot);
            std::string rc = c.references.substr(dot + 1);
            const TableSpec* ref = find_table(rt);
            if (!ref)
                throw ConfigError("foreign key " + t.name + "." + c.name +
                                  " references missing table '" + rt + "'");
            bool found_key = false;
            for (const auto& refcol : ref->columns)
                if (refcol.name == rc) {
                    if (refcol.kind != ColumnKind::Key)
                        throw ConfigError("foreign key " + t.name + "." + c.name +
                                          " must reference a key column, but " + c.references +
                                          " is not one");
                    found_key = true;
                }
            if (!found_key)
                throw ConfigError("foreign key " + t.name + "." + c.name +
                                  " references missing column '" + c.references + "'");
        }
    }
}

static uint64_t count_distinct(const std::vector<int64_t>& values) {
    std::vector<int64_t> copy(values);
    std::sort(copy.begin(), copy.end());
    return static_cast<uint64_t>(std::unique(copy.begin(), copy.end()) - copy.begin());
}

Catalog generate_dataset(const SchemaSpec& schema, uint64_t seed) {
    validate_schema(schema);

    Catalog catalog;
    std::unordered_map<std::string, int> ids;
    for (const auto& t : schema.tables) {
        ids[t.name] = static_cast<int>(catalog.size());
        Relation r;
        r.name = t.name;
        r.row_count = t.rows;
        catalog.push_back(std::move(r));
    }

    for (size_t ti = 0; ti < schema.tables.size(); ++ti) {
        const TableSpec& ts = schema.tables[ti];
        Relation& rel = catalog[ti];
        for (size_t ci = 0; ci < ts.columns.size(); ++ci) {
            const ColumnSpec& cs = ts.columns[ci];
            Column col;
            col.name = cs.name;
            col.kind = cs.kind;
            col.values.resize(ts.rows);
            Rng rng(hash_combine(hash_combine(seed, ti), ci));
            switch (cs.kind) {
                case ColumnKind::Key:
                    for (uint64_t r = 0; r < ts.rows; ++r)
                        col.values[r] = static_cast<int64_t>(r);
                    col.distinct = ts.rows;
                    break;
                case ColumnKind::ForeignKey: {
                    auto dot = cs.references.find('.');
                    col.ref_table = ids.at(cs.references.substr(0, dot));
                    const TableSpec& ref = schema.tables[static_cast<size_t>(col.ref_table)];
                    std::string rc = cs.references.substr(dot + 1);
                    for (size_t k = 0; k < ref.columns.size(); ++k)
                        if (ref.columns[k].name == rc) col.ref_column = static_cast<int>(k);
                    if (ref.rows == 0) {
                        std::fill(col.values.begin(), col.values.end(), kNullSentinel);
                    } else {
                        ZipfSampler zipf(ref.rows, cs.zipf);
                        for (uint64_t r = 0; r < ts.rows; ++r) {
                            if (cs.null_fraction > 0.0 && rng.uniform() < cs.null_fraction)
                                col.values[r] = kNullSentinel;
                            else
                                col.values[r] = static_cast<int64_t>(zipf.sample(rng));
                        }
                    }
                    col.distinct = count_distinct(col.values);
                    break;
                }
                case ColumnKind::Attribute:
                    for (uint64_t r = 0; r < ts.rows; ++r)
                        col.values[r] =
                            static_cast<int64_t>(rng.uniform_u64(static_cast<uint64_t>(cs.domain)));
                    col.distinct = count_distinct(col.values);
                    break;
            }
            rel.columns.push_back(std::move(col));
        }
    }
    return catalog;
}

// --- persistence --------------------------------------------------------------

static std::string kind_name(ColumnKind k) {
    switch (k) {
        case ColumnKind::Key: return "key";
        case ColumnKind::ForeignKey: return "fk";
        case ColumnKind::Attribute: return "attr";
    }
    return "attr";
}

void save_dataset(const Catalog& catalog, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    json manifest;
    manifest["version"] = 1;
    manifest["tables"] = json::array();
    for (const auto& rel : catalog) {
        json jt;
        jt["name"] = rel.name;
        jt["rows"] = rel.row_count;
        jt["columns"] = json::array();
        for (const auto& col : rel.columns) {
            json jc;
            jc["name"] = col.name;
            jc["kind"] = kind_name(col.kind);
            jc["distinct"] = col.distinct;
            if (col.kind == ColumnKind::ForeignKey) {
                jc["ref_table"] = catalog[static_cast<size_t>(col.ref_table)].name;
                jc["ref_column"] =
                    catalog[static_cast<size_t>(col.ref_table)].columns[static_cast<size_t>(col.ref_column)].name;
            }
            jt["columns"].push_back(jc);

            std::string path = dir + "/" + rel.name + "." + col.name + ".col";
            std::ofstream out(path, std::ios::binary);
            if (!out) throw DataError("cannot write column file: " + path);
            for (int64_t v : col.values) {
                unsigned char buf[8];
                uint64_t u = static_cast<uint64_t>(v);
                for (int b = 0; b < 8; ++b) buf[b] = static_cast<unsigned char>((u >> (8 * b)) & 0xff);
                out.write(reinterpret_cast<const char*>(buf), 8);
            }
        }
        manifest["tables"].push_back(jt);
    }
    std::ofstream mf(dir + "/manifest.json");
    mf << manifest.dump(2) << "\n";
}

Catalog load_dataset(const std::string& dir) {
    std::ifstream mf(dir + "/manifest.json");
    if (!mf) throw DataError("cannot open dataset manifest in: " + dir);
    json manifest = json::parse(mf);

    Catalog catalog;
    std::unordered_map<std::string, int> ids;
    for (const auto& jt : manifest.at("tables")) {
        ids[jt.at("name").get<std::string>()] = static_cast<int>(catalog.size());
        Relation rel;
        rel.name = jt.at("name").get<std::string>();
        rel.row_count = jt.at("rows").get<uint64_t>();
        catalog.push_back(std::move(rel));
    }
    size_t ti = 0;
    for (const auto& jt : manifest.at("tables")) {
        Relation& rel = catalog[ti++];
        for (const auto& jc : jt.at("columns")) {
            Column col;
            col.name = jc.at("name").get<std::string>();
            col.kind = parse_kind(jc.at("kind").get<std::string>(), rel.name);
            col.distinct = jc.at("distinct").get<uint64_t>();
            if (col.kind == ColumnKind::ForeignKey) {
                col.ref_table = ids.at(jc.at("ref_table").get<std::string>());
                col.ref_column =
                    catalog[static_cast<size_t>(col.ref_table)].column_index(jc.at("ref_column").get<std::string>());
            }
            std::string path = dir + "/" + rel.name + "." + col.name + ".col";
            std::ifstream in(path, std::ios::binary);
            if (!in) throw DataError("missing column file: " + path);
            col.values.resize(rel.row_count);
            for (uint64_t r = 0; r < rel.row_count; ++r) {
                unsigned char buf[8];
                in.read(reinterpret_cast<char*>(buf), 8);
                if (!in) throw DataError("truncated column file: " + path);
                uint64_t u = 0;
                for (int b = 0; b < 8; ++b) u |= static_cast<uint64_t>(buf[b]) << (8 * b);
                col.values[r] = static_cast<int64_t>(u);
            }
            rel.columns.push_back(std::move(col));
        }
    }
    return catalog;
}

// --- evaluation ----------------------------------------------------------------

Relation evaluate_filter(const Relation& relation, const Predicate& predicate) {
    if (predicate.column < 0 || static_cast<size_t>(predicate.column) >= relation.columns.size())
        throw ConfigError("filter references unknown column index in table '" + relation.name + "'");
    const auto& vals = relation.columns[static_cast<size_t>(predicate.column)].values;
    std::vector<uint32_t> keep;
    for (uint32_t r = 0; r < vals.size(); ++r)
        if (predicate.matches(vals[r])) keep.push_back(r);

    Relation out;
    out.name = relation.name;
    out.row_count = keep.size();
    for (const auto& col : relation.columns) {
        Column c;
        c.name = col.name;
        c.kind = col.kind;
        c.ref_table = col.ref_table;
        c.ref_column = col.ref_column;
        c.values.reserve(keep.size());
        for (uint32_t r : keep) c.values.push_back(col.values[r]);
        c.distinct = count_distinct(c.values);
        out.columns.push_back(std::move(c));
    }
    return out;
}

std::vector<uint32_t> scan_filter(const Relation& relation, int table_id,
                                  const std::vector<Predicate>& preds) {
    std::vector<const Predicate*> mine;
    for (const auto& p : preds) {
        if (p.table != table_id) continue;
        if (p.column < 0 || static_cast<size_t>(p.column) >= relation.columns.size())
            throw ConfigError("filter references unknown column index in table '" + relation.name + "'");
        mine.push_back(&p);
    }
    std::vector<uint32_t> out;
    out.reserve(relation.row_count);
    for (uint32_t r = 0; r < relation.row_count; ++r) {
        bool ok = true;
        for (const Predicate* p : mine)
            if (!p->matches(relation.columns[static_cast<size_t>(p->column)].values[r])) {
                ok = false;
                break;
            }
        if (ok) out.push_back(r);
    }
    return out;
}

int Materialized::slot_of(int table) const {
    for (size_t i = 0; i < tables.size(); ++i)
        if (tables[i] == table) return static_cast<int>(i);
    return -1;
}

Materialized materialize_scan(const Catalog& catalog, int table_id,
                              const std::vector<Predicate>& preds) {
    Materialized m;
    m.tables = {table_id};
    m.rows.push_back(scan_filter(catalog.at(static_cast<size_t>(table_id)), table_id, preds));
    return m;
}

namespace {

struct SideKey {
    const Materialized* side;
    std::vector<std::pair<int, const std::vector<int64_t>*>> cols;  // (slot, values)

    int64_t value(size_t tuple, size_t c) const {
        uint32_t row = side->rows[static_cast<size_t>(cols[c].first)][tuple];
        return (*cols[c].second)[row];
    }
    // Hash of the composite key, or nullopt if any component is null.
    std::optional<uint64_t> hash(size_t tuple) const {
        uint64_t h = 0x9e3779b97f4a7c15ULL;
        for (size_t c = 0; c < cols.size(); ++c) {
            int64_t v = value(tuple, c);
            if (v == kNullSentinel) return std::nullopt;
            h = hash_combine(h, static_cast<uint64_t>(v));
        }
        return h;
    }
    bool equals(size_t tuple, const SideKey& other, size_t other_tuple) const {
        for (size_t c = 0; c < cols.size(); ++c)
            if (value(tuple, c) != other.value(other_tuple, c)) return false;
        return true;
    }
};

// Key accessor for whichever endpoint of each condition lives on this side.
SideKey make_key(const Catalog& catalog, const Materialized& side,
                 const std::vector<JoinEdge>& conds) {
    SideKey k{&side, {}};
    for (const auto& e : conds) {
        const ColumnRef& use = side.slot_of(e.left.table) >= 0 ? e.left : e.right;
        int slot = side.slot_of(use.table);
        if (slot < 0) throw DataError("join condition endpoint not present in input");
        k.cols.emplace_back(
            slot, &catalog[static_cast<size_t>(use.table)].columns[static_cast<size_t>(use.column)].values);
    }
    return k;
}

} // namespace

Materialized join_materialized(const Catalog& catalog, const Materialized& left,
                               const Materialized& right, const std::vector<JoinEdge>& conds) {
    if (conds.empty()) throw DataError("join without conditions would require Cartesian product");

    const Materialized& build = left.tuple_count() <= right.tuple_count() ? left : right;
    const Materialized& probe = &build == &left ? right : left;

    SideKey bk = make_key(catalog, build, conds);
    SideKey pk = make_key(catalog, probe, conds);

    std::unordered_map<uint64_t, std::vector<uint32_t>> table;
    table.reserve(build.tuple_count() * 2 + 1);
    for (size_t t = 0; t < build.tuple_count(); ++t)
        if (auto h = bk.hash(t)) table[*h].push_back(static_cast<uint32_t>(t));

    Materialized out;
    out.tables = build.tables;
    for (int t : probe.tables) out.tables.push_back(t);
    std::sort(out.tables.begin(), out.tables.end());
    out.rows.assign(out.tables.size(), {});

    std::vector<int> build_slot(build.tables.size()), probe_slot(probe.tables.size());
    for (size_t i = 0; i < build.tables.size(); ++i) build_slot[i] = out.slot_of(build.tables[i]);
    for (size_t i = 0; i < probe.tables.size(); ++i) probe_slot[i] = out.slot_of(probe.tables[i]);

    for (size_t t = 0; t < probe.tuple_count(); ++t) {
        auto h = pk.hash(t);
        if (!h) continue;
        auto it = table.find(*h);
        if (it == table.end()) continue;
        for (uint32_t bt : it->second) {
            if (!pk.equals(t, bk, bt)) continue;
            for (size_t i = 0; i < build.tables.size(); ++i)
                out.rows[static_cast<size_t>(build_slot[i])].push_back(build.rows[i][bt]);
            for (size_t i = 0; i < probe.tables.size(); ++i)
                out.rows[static_cast<size_t>(probe_slot[i])].push_back(probe.rows[i][t]);
        }
    }
    return out;
}

uint64_t exact_join_cardinality(const Catalog& catalog, const JoinGraph& graph,
                                uint64_t subset_mask) {
    if (subset_mask == 0) throw DataError("empty table subset");
    if (!graph.connected(subset_mask))
        throw DataError("table subset would require Cartesian product");

    std::vector<int> todo;
    for (int t : graph.tables)
        if (subset_mask & (uint64_t{1} << t)) todo.push_back(t);
    std::sort(todo.begin(), todo.end());

    Materialized acc = materialize_scan(catalog, todo.front(), graph.predicates);
    uint64_t done_mask = uint64_t{1} << todo.front();
    todo.erase(todo.begin());

    while (!todo.empty()) {
        // Lowest-id table with an edge into the accumulated set.
        size_t pick = todo.size();
        std::vector<JoinEdge> conds;
        for (size_t i = 0; i < todo.size() && pick == todo.size(); ++i) {
            for (const auto& e : graph.edges) {
                bool lt = e.left.table == todo[i] && (done_mask & (uint64_t{1} << e.right.table));
                bool rt = e.right.table == todo[i] && (done_mask & (uint64_t{1} << e.left.table));
                if (lt || rt) { pick = i; break; }
            }
        }
        if (pick == todo.size())
            throw DataError("table subset would require Cartesian product");
        int next = todo[pick];
        uint64_t next_bit = uint64_t{1} << next;
        for (const auto& e : graph.edges) {
            uint64_t lb = uint64_t{1} << e.left.table;
            uint64_t rb = uint64_t{1} << e.right.table;
            if ((lb == next_bit && (done_mask & rb)) || (rb == next_bit && (done_mask & lb)))
                conds.push_back(e);
        }
        Materialized side = materialize_scan(catalog, next, graph.predicates);
        acc = join_materialized(catalog, acc, side, conds);
        done_mask |= next_bit;
        todo.erase(todo.begin() + static_cast<long>(pick));
    }
    return acc.tuple_count();
}

} // namespace aqora
