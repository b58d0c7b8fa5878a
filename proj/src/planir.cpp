#include "aqora/planir.hpp"

#include <algorithm>
#include <bit>
#include <sstream>

#include "aqora/rng.hpp"

namespace aqora {

// --- construction -----------------------------------------------------------

NodePtr make_scan(int table, std::vector<Predicate> predicates) {
    auto n = std::make_shared<PlanNode>();
    n->kind = NodeKind::Scan;
    n->table = table;
    n->tables = uint64_t{1} << table;
    n->predicates = std::move(predicates);
    return n;
}

NodePtr make_completed(int stage_id, uint64_t tables, std::optional<ObservedStats> observed) {
    auto n = std::make_shared<PlanNode>();
    n->kind = NodeKind::CompletedStage;
    n->stage_id = stage_id;
    n->tables = tables;
    n->observed = observed;
    return n;
}

NodePtr make_join(NodePtr left, NodePtr right, std::vector<JoinEdge> conditions, JoinOp op,
                  Side build, bool hinted) {
    if (!left || !right) throw InvalidActionError("join requires two children");
    if (left->tables & right->tables)
        throw InvalidActionError("join children must cover disjoint table sets");
    uint64_t united = left->tables | right->tables;
    for (auto& c : conditions) {
        c = c.canonical();
        uint64_t m = (uint64_t{1} << c.left.table) | (uint64_t{1} << c.right.table);
        if ((m & united) != m || (m & left->tables) == m || (m & right->tables) == m)
            throw InvalidActionError("join condition must span both children");
    }
    std::sort(conditions.begin(), conditions.end());
    auto n = std::make_shared<PlanNode>();
    n->kind = NodeKind::Join;
    n->tables = united;
    n->conditions = std::move(conditions);
    n->op = op;
    n->build = build;
    n->hinted = hinted;
    n->left = std::move(left);
    n->right = std::move(right);
    return n;
}

NodePtr make_unary(UnaryKind kind, NodePtr child, std::vector<Predicate> predicates) {
    auto n = std::make_shared<PlanNode>();
    n->kind = NodeKind::Unary;
    n->unary = kind;
    n->tables = child->tables;
    n->predicates = std::move(predicates);
    n->child = std::move(child);
    return n;
}

// --- readout -------------------------------------------------------------------

static void collect(const NodePtr& node, std::vector<NodePtr>* leaves,
                    std::vector<JoinEdge>* conds) {
    switch (node->kind) {
        case NodeKind::Scan:
        case NodeKind::CompletedStage:
            if (leaves) leaves->push_back(node);
            break;
        case NodeKind::Unary:
            collect(node->child, leaves, conds);
            break;
        case NodeKind::Join:
            if (conds)
                for (const auto& c : node->conditions) conds->push_back(c.canonical());
            collect(node->left, leaves, conds);
            collect(node->right, leaves, conds);
            break;
    }
}

JoinsView extract_joins(const NodePtr& plan) {
    JoinsView v;
    std::vector<JoinEdge> conds;
    // leaves in left-to-right order: traverse left before right
    std::function<void(const NodePtr&)> walk = [&](const NodePtr& n) {
        switch (n->kind) {
            case NodeKind::Scan:
            case NodeKind::CompletedStage: v.leaves.push_back(n); break;
            case NodeKind::Unary: walk(n->child); break;
            case NodeKind::Join:
                for (const auto& c : n->conditions) conds.push_back(c.canonical());
                walk(n->left);
                walk(n->right);
                break;
        }
    };
    walk(plan);
    std::sort(conds.begin(), conds.end());
    conds.erase(std::unique(conds.begin(), conds.end()), conds.end());
    v.conditions = std::move(conds);
    return v;
}

int leaf_count(const NodePtr& plan) {
    std::vector<NodePtr> leaves;
    collect(plan, &leaves, nullptr);
    return static_cast<int>(leaves.size());
}

int join_count(const NodePtr& plan) {
    if (!plan) return 0;
    switch (plan->kind) {
        case NodeKind::Join: return 1 + join_count(plan->left) + join_count(plan->right);
        case NodeKind::Unary: return join_count(plan->child);
        default: return 0;
    }
}

int planned_shuffle_total(const NodePtr& plan) {
    if (!plan) return 0;
    switch (plan->kind) {
        case NodeKind::Join:
            return (plan->op == JoinOp::SMJ ? 2 : 0) + planned_shuffle_total(plan->left) +
                   planned_shuffle_total(plan->right);
        case NodeKind::Unary: return planned_shuffle_total(plan->child);
        default: return 0;
    }
}

static bool composite(const NodePtr& n) {
    if (n->kind == NodeKind::Unary) return composite(n->child);
    if (n->kind == NodeKind::Join) return true;
    return std::popcount(n->tables) > 1;  // multi-table completed stage
}

bool is_bushy(const NodePtr& plan) {
    if (!plan) return false;
    switch (plan->kind) {
        case NodeKind::Join:
            if (composite(plan->left) && composite(plan->right)) return true;
            return is_bushy(plan->left) || is_bushy(plan->right);
        case NodeKind::Unary: return is_bushy(plan->child);
        default: return false;
    }
}

// --- swap / lead ------------------------------------------------------------------

std::vector<uint64_t> leaf_table_sets(const NodePtr& plan) {
    std::vector<NodePtr> leaves;
    collect(plan, &leaves, nullptr);
    std::vector<uint64_t> out;
    out.reserve(leaves.size());
    for (const auto& l : leaves) out.push_back(l->tables);
    return out;
}

std::vector<uint64_t> condition_table_masks(const NodePtr& plan) {
    auto v = extract_joins(plan);
    std::vector<uint64_t> out;
    out.reserve(v.conditions.size());
    for (const auto& c : v.conditions)
        out.push_back((uint64_t{1} << c.left.table) | (uint64_t{1} << c.right.table));
    return out;
}

bool rebuild_feasible(const std::vector<uint64_t>& leaf_tables_in_order,
                      const std::vector<uint64_t>& condition_masks) {
    if (leaf_tables_in_order.empty()) return false;
    uint64_t acc = leaf_tables_in_order.front();
    for (size_t k = 1; k < leaf_tables_in_order.size(); ++k) {
        uint64_t leaf = leaf_tables_in_order[k];
        uint64_t united = acc | leaf;
        bool found = false;
        for (uint64_t m : condition_masks)
            if ((m & united) == m && (m & acc) != m && (m & leaf) != m) {
                found = true;
                break;
            }
        if (!found) return false;
        acc = united;
    }
    return true;
}

static uint64_t condition_mask(const JoinEdge& c) {
    return (uint64_t{1} << c.left.table) | (uint64_t{1} << c.right.table);
}

// Smallest table id on the left; makes rebuilds deterministic and
// orientation-stable under identity permutations.
static NodePtr orient(NodePtr n) {
    if (n->kind != NodeKind::Join) return n;
    NodePtr l = orient(n->left);
    NodePtr r = orient(n->right);
    if (std::countr_zero(r->tables) < std::countr_zero(l->tables)) std::swap(l, r);
    return make_join(std::move(l), std::move(r), n->conditions, n->op, n->build, n->hinted);
}

NodePtr apply_swap_or_lead(const NodePtr& plan, const StructuralAction& action) {
    JoinsView v = extract_joins(plan);
    const int n = static_cast<int>(v.leaves.size());

    std::vector<NodePtr> order;
    if (const auto* swap = std::get_if<SwapLeaves>(&action)) {
        if (swap->i < 1 || swap->j < 1 || swap->i > n || swap->j > n || swap->i > swap->j)
            throw InvalidActionError("swap positions out of range");
        if (swap->i == swap->j) return plan;
        order = v.leaves;
        std::swap(order[static_cast<size_t>(swap->i - 1)], order[static_cast<size_t>(swap->j - 1)]);
    } else {
        const auto& lead = std::get<LeadLeaf>(action);
        if (lead.i < 1 || lead.i > n) throw InvalidActionError("lead position out of range");
        if (lead.i == 1) return plan;
        order.push_back(v.leaves[static_cast<size_t>(lead.i - 1)]);
        for (int k = 0; k < n; ++k)
            if (k != lead.i - 1) order.push_back(v.leaves[static_cast<size_t>(k)]);
    }

    // Rebuild left-deep over the permuted order; every not-yet-attached
    // condition that spans the two sides attaches here. A step with no
    // attachable condition would be a Cartesian product: bail out.
    std::vector<bool> used(v.conditions.size(), false);
    NodePtr acc = order.front();
    for (int k = 1; k < n; ++k) {
        const NodePtr& leaf = order[static_cast<size_t>(k)];
        uint64_t united = acc->tables | leaf->tables;
        std::vector<JoinEdge> here;
        for (size_t c = 0; c < v.conditions.size(); ++c) {
            if (used[c]) continue;
            uint64_t m = condition_mask(v.conditions[c]);
            if ((m & united) == m && (m & acc->tables) != m && (m & leaf->tables) != m) {
                here.push_back(v.conditions[c]);
                used[c] = true;
            }
        }
        if (here.empty()) return plan;
        acc = make_join(acc, leaf, std::move(here));
    }
    return orient(acc);
}

// --- broadcast hint -----------------------------------------------------------------

namespace {

struct HintWalk {
    int target;   // 1-based position of the leaf, counting left-to-right
    int seen = 0; // leaves passed so far
    bool applied = false;

    NodePtr walk(const NodePtr& n) {
        switch (n->kind) {
            case NodeKind::Scan:
            case NodeKind::CompletedStage: {
                ++seen;
                return n;
            }
            case NodeKind::Unary: {
                NodePtr c = walk(n->child);
                if (c == n->child) return n;
                auto copy = std::make_shared<PlanNode>(*n);
                copy->child = c;
                return copy;
            }
            case NodeKind::Join: {
                int before = seen;
                NodePtr l = walk(n->left);
                bool hit_left = !applied && target > before && target <= seen;
                int mid = seen;
                NodePtr r = walk(n->right);
                bool hit_right = !applied && target > mid && target <= seen;
                bool direct_left = hit_left && (n->left->kind == NodeKind::Scan ||
                                                n->left->kind == NodeKind::CompletedStage ||
                                                l != n->left);
                (void)direct_left;
                // The nearest enclosing join of the leaf is the first join
                // whose scan/completed child range covers the target and whose
                // child on that side is itself the leaf (no deeper join
                // claimed it first: deeper joins return applied=true).
                if ((hit_left || hit_right) && !applied) {
                    Side side = hit_left ? Side::Left : Side::Right;
                    const NodePtr& leaf_side = hit_left ? l : r;
                    bool is_leaf = leaf_side->kind == NodeKind::Scan ||
                                   leaf_side->kind == NodeKind::CompletedStage;
                    if (is_leaf) {
                        applied = true;
                        return make_join(l, r, n->conditions, JoinOp::BHJ, side, true);
                    }
                }
                if (l == n->left && r == n->right) return n;
                return make_join(l, r, n->conditions, n->op, n->build, n->hinted);
            }
        }
        return n;
    }
};

} // namespace

HintResult inject_broadcast_hint(const NodePtr& plan, int leaf_position) {
    int n = leaf_count(plan);
    if (leaf_position < 1 || leaf_position > n)
        throw InvalidActionError("broadcast leaf position out of range");
    if (n == 1) return {plan, false};  // single-table plan: nothing to hint
    HintWalk w{leaf_position};
    NodePtr out = w.walk(plan);
    return {w.applied ? out : plan, w.applied};
}

// --- plan-space arithmetic ------------------------------------------------------------

Bignum Bignum::one() { return Bignum{{1}}; }

void Bignum::mul_u64(uint64_t m) {
    uint64_t carry = 0;
    for (auto& limb : limbs) {
        uint64_t cur = static_cast<uint64_t>(limb) * m + carry;
        limb = static_cast<uint32_t>(cur % 1000000000ULL);
        carry = cur / 1000000000ULL;
    }
    while (carry) {
        limbs.push_back(static_cast<uint32_t>(carry % 1000000000ULL));
        carry /= 1000000000ULL;
    }
}

std::string Bignum::to_string() const {
    std::ostringstream os;
    os << limbs.back();
    for (auto it = limbs.rbegin() + 1; it != limbs.rend(); ++it) {
        std::string part = std::to_string(*it);
        os << std::string(9 - part.size(), '0') << part;
    }
    return os.str();
}

Bignum count_plan_space(int n, PlanShape shape) {
    if (n < 1) throw ConfigError("plan space requires at least one table");
    Bignum b = Bignum::one();
    if (shape == PlanShape::LeftDeep) {
        for (int k = 2; k <= n; ++k) b.mul_u64(static_cast<uint64_t>(k));
    } else {
        // (2n-2)! / (n-1)! = n * (n+1) * ... * (2n-2)
        for (int k = n; k <= 2 * n - 2; ++k) b.mul_u64(static_cast<uint64_t>(k));
    }
    return b;
}

// --- execution & digest ------------------------------------------------------------------

Materialized execute_plan(const NodePtr& plan, const Catalog& catalog, const StageLookup& stages) {
    switch (plan->kind) {
        case NodeKind::Scan:
            return materialize_scan(catalog, plan->table, plan->predicates);
        case NodeKind::CompletedStage: {
            if (!stages) throw DataError("plan contains a completed stage but no stage lookup given");
            const Materialized* m = stages(plan->stage_id);
            if (!m) throw DataError("unknown stage id " + std::to_string(plan->stage_id));
            return *m;
        }
        case NodeKind::Unary: {
            Materialized child = execute_plan(plan->child, catalog, stages);
            if (plan->unary != UnaryKind::Filter || plan->predicates.empty()) return child;
            Materialized out;
            out.tables = child.tables;
            out.rows.assign(child.tables.size(), {});
            for (size_t t = 0; t < child.tuple_count(); ++t) {
                bool ok = true;
                for (const auto& p : plan->predicates) {
                    int slot = child.slot_of(p.table);
                    if (slot < 0) continue;
                    int64_t v = catalog[static_cast<size_t>(p.table)]
                                    .columns[static_cast<size_t>(p.column)]
                                    .values[child.rows[static_cast<size_t>(slot)][t]];
                    if (!p.matches(v)) { ok = false; break; }
                }
                if (!ok) continue;
                for (size_t i = 0; i < child.tables.size(); ++i)
                    out.rows[i].push_back(child.rows[i][t]);
            }
            return out;
        }
        case NodeKind::Join: {
            Materialized l = execute_plan(plan->left, catalog, stages);
            Materialized r = execute_plan(plan->right, catalog, stages);
            return join_materialized(catalog, l, r, plan->conditions);
        }
    }
    throw DataError("unreachable plan node kind");
}

ResultDigest digest_of(const Materialized& m) {
    ResultDigest d;
    d.count = m.tuple_count();
    for (size_t t = 0; t < m.tuple_count(); ++t) {
        uint64_t h = 0x533af3f813779113ULL;
        for (size_t i = 0; i < m.tables.size(); ++i) {
            h = hash_combine(h, static_cast<uint64_t>(m.tables[i]));
            h = hash_combine(h, m.rows[i][t]);
        }
        d.sum += h;
        d.sum2 += mix64(h);
    }
    return d;
}

ResultDigest result_multiset(const NodePtr& plan, const Catalog& catalog,
                             const StageLookup& stages) {
    return digest_of(execute_plan(plan, catalog, stages));
}

std::string ResultDigest::hex() const {
    std::ostringstream os;
    os << std::hex << sum << ":" << sum2 << ":" << std::dec << count;
    return os.str();
}

// --- serialization ---------------------------------------------------------------------------

static std::string table_set_text(uint64_t mask, const Catalog& catalog) {
    std::string out = "{";
    bool first = true;
    for (int t = 0; t < 64; ++t)
        if (mask & (uint64_t{1} << t)) {
            if (!first) out += ",";
            out += static_cast<size_t>(t) < catalog.size() ? catalog[static_cast<size_t>(t)].name
                                                           : "#" + std::to_string(t);
            first = false;
        }
    return out + "}";
}

static std::string column_text(const ColumnRef& r, const Catalog& catalog) {
    return catalog[static_cast<size_t>(r.table)].name + "." +
           catalog[static_cast<size_t>(r.table)].columns[static_cast<size_t>(r.column)].name;
}

static void node_text(const NodePtr& n, const Catalog& catalog, int depth, std::ostringstream& os) {
    os << std::string(static_cast<size_t>(depth) * 2, ' ');
    switch (n->kind) {
        case NodeKind::Scan: {
            os << "Scan " << catalog[static_cast<size_t>(n->table)].name;
            for (const auto& p : n->predicates) {
                os << " pred=" << column_text({p.table, p.column}, catalog) << " in [" << p.lo << ","
                   << p.hi << "]";
            }
            os << " tables=" << table_set_text(n->tables, catalog) << "\n";
            break;
        }
        case NodeKind::CompletedStage:
            os << "CompletedStage#" << n->stage_id << " tables=" << table_set_text(n->tables, catalog)
               << "\n";
            break;
        case NodeKind::Unary: {
            const char* k = n->unary == UnaryKind::Filter  ? "Filter"
                            : n->unary == UnaryKind::Sort ? "Sort"
                                                          : "Exchange";
            os << k << " tables=" << table_set_text(n->tables, catalog) << "\n";
            node_text(n->child, catalog, depth + 1, os);
            break;
        }
        case NodeKind::Join: {
            os << "Join[" << (n->op == JoinOp::SMJ ? "SMJ" : (n->build == Side::Left ? "BHJ(left)" : "BHJ(right)"))
               << (n->hinted ? ",hint" : "") << "]";
            os << " cond=(";
            for (size_t i = 0; i < n->conditions.size(); ++i) {
                if (i) os << " and ";
                os << column_text(n->conditions[i].left, catalog) << "="
                   << column_text(n->conditions[i].right, catalog);
            }
            os << ") tables=" << table_set_text(n->tables, catalog) << "\n";
            node_text(n->left, catalog, depth + 1, os);
            node_text(n->right, catalog, depth + 1, os);
            break;
        }
    }
}

std::string plan_to_text(const NodePtr& plan, const Catalog& catalog) {
    std::ostringstream os;
    node_text(plan, catalog, 0, os);
    return os.str();
}

} // namespace aqora
