#pragma once

// Typed syntax tree for the SELECT subset of the SQLite dialect used by
// Spider/BIRD, plus its canonical text serialization.
//
// Nodes are plain values: copying a tree deep-copies it, and operator==
// is structural equality. Expression nodes share one struct with a kind tag;
// the fields that do not apply to a kind keep their default values so that
// structural equality stays meaningful.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace etm {

/// Nullable owning pointer with deep-copy and value equality.
template <typename T>
class Box {
 public:
  Box() = default;
  Box(T value) : ptr_(std::make_unique<T>(std::move(value))) {}  // NOLINT: implicit by intent
  Box(const Box& other) : ptr_(other.ptr_ ? std::make_unique<T>(*other.ptr_) : nullptr) {}
  Box(Box&&) noexcept = default;
  Box& operator=(const Box& other) {
    if (this != &other) ptr_ = other.ptr_ ? std::make_unique<T>(*other.ptr_) : nullptr;
    return *this;
  }
  Box& operator=(Box&&) noexcept = default;
  ~Box() = default;

  explicit operator bool() const { return ptr_ != nullptr; }
  T& operator*() { return *ptr_; }
  const T& operator*() const { return *ptr_; }
  T* operator->() { return ptr_.get(); }
  const T* operator->() const { return ptr_.get(); }
  T* get() { return ptr_.get(); }
  const T* get() const { return ptr_.get(); }

  friend bool operator==(const Box& a, const Box& b) {
    if (!a.ptr_ || !b.ptr_) return !a.ptr_ && !b.ptr_;
    return *a.ptr_ == *b.ptr_;
  }

 private:
  std::unique_ptr<T> ptr_;
};

struct Query;

enum class QuoteStyle { kNone, kDouble, kBacktick, kBracket };

enum class LiteralKind { kNumber, kString, kNull };

enum class ExprKind {
  kColumn,       // table (optional) + column
  kLiteral,      // literal + text
  kStar,         // table (optional)
  kUnary,        // op in {NOT, -, +}; args[0]
  kBinary,       // op; args[0], args[1]; negated for NOT LIKE / IS NOT
  kBetween,      // args = {target, low, high}; negated
  kInList,       // args[0] = target, args[1..] = items; negated
  kInSubquery,   // args[0] = target, subquery; negated
  kExists,       // subquery; negated
  kSubquery,     // scalar subquery
  kFunction,     // op = upper-case name; distinct; args. CAST keeps its type in text
  kCase,         // [operand] (when then)* [else]; see case_operand / case_else
  kParen,        // args[0]
};

struct Expr {
  ExprKind kind = ExprKind::kLiteral;
  std::string op;
  std::string table;
  std::string column;
  QuoteStyle table_quote = QuoteStyle::kNone;
  QuoteStyle column_quote = QuoteStyle::kNone;
  LiteralKind literal = LiteralKind::kNull;
  std::string text;  // literal source text (strings unescaped), CAST target type
  bool distinct = false;
  bool negated = false;
  bool case_operand = false;
  bool case_else = false;
  std::vector<Expr> args;
  Box<Query> subquery;

  bool operator==(const Expr& other) const;

  static Expr Column(std::string table, std::string column);
  static Expr Number(std::string text);
  static Expr String(std::string text);
  static Expr Null();
  static Expr Star(std::string table = {});
  static Expr Unary(std::string op, Expr operand);
  static Expr Binary(std::string op, Expr lhs, Expr rhs, bool negated = false);
  static Expr Function(std::string name, std::vector<Expr> args, bool distinct = false);
  static Expr Paren(Expr inner);
  static Expr ScalarSubquery(Query query);
};

struct Projection {
  Expr expr;
  std::string alias;
  QuoteStyle alias_quote = QuoteStyle::kNone;
  bool operator==(const Projection&) const = default;
};

enum class JoinKind { kInner, kLeft, kRight, kFull, kCross };

struct TableSource {
  bool derived = false;
  std::string name;  // named tables only
  QuoteStyle name_quote = QuoteStyle::kNone;
  Box<Query> query;  // derived tables only
  std::string alias;
  QuoteStyle alias_quote = QuoteStyle::kNone;
  bool operator==(const TableSource&) const = default;

  static TableSource Named(std::string name, std::string alias = {});
  static TableSource Derived(Query query, std::string alias = {});
};

struct JoinItem {
  JoinKind kind = JoinKind::kInner;
  TableSource source;
  std::optional<Expr> on;
  bool operator==(const JoinItem&) const = default;
};

struct FromClause {
  TableSource base;
  std::vector<JoinItem> joins;
  bool operator==(const FromClause&) const = default;
};

struct SelectCore {
  bool distinct = false;
  std::vector<Projection> projections;
  std::optional<FromClause> from;
  std::optional<Expr> where;
  std::vector<Expr> group_by;
  std::optional<Expr> having;
  bool operator==(const SelectCore&) const = default;
};

enum class SetOp { kNone, kUnion, kUnionAll, kIntersect, kExcept };

/// Either a single SELECT (op == kNone) or a binary compound.
struct SetExpr {
  SetOp op = SetOp::kNone;
  SelectCore select;
  Box<SetExpr> left;
  Box<SetExpr> right;
  bool operator==(const SetExpr&) const = default;

  bool is_select() const { return op == SetOp::kNone; }
  static SetExpr Compound(SetOp op, SetExpr lhs, SetExpr rhs);
};

struct OrderItem {
  Expr expr;
  bool desc = false;
  bool operator==(const OrderItem&) const = default;
};

struct LimitSpec {
  std::int64_t count = 0;
  std::optional<std::int64_t> offset;
  bool operator==(const LimitSpec&) const = default;
};

struct Cte;

struct Query {
  std::vector<Cte> ctes;
  SetExpr body;
  std::vector<OrderItem> order_by;
  std::optional<LimitSpec> limit;
  bool operator==(const Query&) const;
};

struct Cte {
  std::string name;
  QuoteStyle name_quote = QuoteStyle::kNone;
  Query query;
  bool operator==(const Cte&) const = default;
};

inline bool Expr::operator==(const Expr&) const = default;
inline bool Query::operator==(const Query&) const = default;

/// Deterministic SQL text for a tree. Parenthesizes wherever precedence
/// requires, so trees without explicit Paren nodes still print faithfully.
std::string serialize(const Query& query);
std::string serialize(const Expr& expr);
std::string serialize(const SelectCore& core);
std::string serialize(const TableSource& source);

const char* to_string(SetOp op);
const char* to_string(JoinKind kind);

// Binding strength used by the parser and serializer; higher binds tighter.
int binary_precedence(const std::string& op);

}  // namespace etm
