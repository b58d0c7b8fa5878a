#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "aqora/relstore.hpp"

namespace aqora {

enum class NodeKind { Scan, Join, CompletedStage, Unary };
enum class UnaryKind { Filter, Sort, Exchange };
enum class JoinOp { SMJ, BHJ };
enum class Side { Left, Right };

struct ObservedStats {
    uint64_t rows = 0;
    uint64_t bytes = 0;
};

struct PlanNode;
using NodePtr = std::shared_ptr<const PlanNode>;

// Immutable physical plan tree. Transformations return new trees and share
// untouched subtrees.
struct PlanNode {
    NodeKind kind = NodeKind::Scan;
    uint64_t tables = 0;  // bitmask over catalog table ids

    // Scan
    int table = -1;
    std::vector<Predicate> predicates;

    // Join. `conditions` holds every equijoin that becomes evaluable exactly
    // at this node; `hinted` pins the operator against AQE re-derivation.
    std::vector<JoinEdge> conditions;
    JoinOp op = JoinOp::SMJ;
    Side build = Side::Right;
    bool hinted = false;
    NodePtr left, right;

    // CompletedStage
    int stage_id = -1;

    // Unary decoration (filter/sort/exchange); spliced out by tree
    // compression before any model or transformation sees the plan.
    UnaryKind unary = UnaryKind::Filter;
    NodePtr child;

    std::optional<ObservedStats> observed;
};

NodePtr make_scan(int table, std::vector<Predicate> predicates);
NodePtr make_join(NodePtr left, NodePtr right, std::vector<JoinEdge> conditions,
                  JoinOp op = JoinOp::SMJ, Side build = Side::Right, bool hinted = false);
NodePtr make_completed(int stage_id, uint64_t tables, std::optional<ObservedStats> observed = {});
NodePtr make_unary(UnaryKind kind, NodePtr child, std::vector<Predicate> predicates = {});

// --- structure readout ------------------------------------------------------

struct JoinsView {
    std::vector<NodePtr> leaves;      // left-to-right order
    std::vector<JoinEdge> conditions; // canonical, sorted, duplicate-free
};

JoinsView extract_joins(const NodePtr& plan);

int leaf_count(const NodePtr& plan);
int join_count(const NodePtr& plan);

// Shuffle tally still ahead of the plan: 2 per sort-merge join, 0 per
// broadcast join.
int planned_shuffle_total(const NodePtr& plan);

// True when some join has two composite inputs (a CompletedStage covering
// more than one table counts as composite).
bool is_bushy(const NodePtr& plan);

// --- transformations ---------------------------------------------------------

struct SwapLeaves { int i = 0, j = 0; };  // 1-based leaf positions, i <= j
struct LeadLeaf { int i = 0; };           // move leaf i to the front
using StructuralAction = std::variant<SwapLeaves, LeadLeaf>;

// Controlled leaf permutation: rebuilds the join tree over the permuted leaf
// order, attaching every condition at the first join where it becomes
// evaluable. Returns the ORIGINAL plan when any rebuild step would need a
// Cartesian product. Rebuilt joins default to SMJ and drop broadcast hints;
// operator re-derivation is the caller's job. Children of rebuilt joins are
// oriented canonically (smallest participating table id on the left).
NodePtr apply_swap_or_lead(const NodePtr& plan, const StructuralAction& action);

// Feasibility of the same rebuild, on table sets only. Used by action
// masking so that masked sampling and plan transformation agree.
bool rebuild_feasible(const std::vector<uint64_t>& leaf_tables_in_order,
                      const std::vector<uint64_t>& condition_masks);

// Convenience: leaf table sets and condition masks of a plan.
std::vector<uint64_t> leaf_table_sets(const NodePtr& plan);
std::vector<uint64_t> condition_table_masks(const NodePtr& plan);

struct HintResult {
    NodePtr plan;
    bool applied = false;  // false for single-leaf plans (no enclosing join)
};

// Marks the nearest enclosing join of the leaf as a forced broadcast hash
// join with the leaf's side as build side.
HintResult inject_broadcast_hint(const NodePtr& plan, int leaf_position);

// --- plan-space arithmetic ---------------------------------------------------

enum class PlanShape { LeftDeep, Bushy };

// Exact decimal big integer; large enough for (2n-2)!/(n-1)! at any n that
// fits in a table bitmask.
struct Bignum {
    std::vector<uint32_t> limbs{0};  // base 1e9, little-endian

    static Bignum one();
    void mul_u64(uint64_t m);
    std::string to_string() const;
    bool operator==(const Bignum&) const = default;
};

Bignum count_plan_space(int n, PlanShape shape);

// --- result equivalence -------------------------------------------------------

// Order-independent multiset digest of a plan's join result. Equal digests
// mean equal result multisets up to hash collision.
struct ResultDigest {
    uint64_t sum = 0;
    uint64_t sum2 = 0;
    uint64_t count = 0;
    bool operator==(const ResultDigest&) const = default;
    std::string hex() const;
};

using StageLookup = std::function<const Materialized*(int stage_id)>;

Materialized execute_plan(const NodePtr& plan, const Catalog& catalog,
                          const StageLookup& stages = {});

ResultDigest result_multiset(const NodePtr& plan, const Catalog& catalog,
                             const StageLookup& stages = {});

ResultDigest digest_of(const Materialized& m);

// --- serialization -------------------------------------------------------------

// Stable indented text form, one node per line; the golden-file format.
std::string plan_to_text(const NodePtr& plan, const Catalog& catalog);

} // namespace aqora
