#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "loopscope/ir/value.hpp"
#include "loopscope/ir/word.hpp"

namespace loopscope {

// Small expression language used by process specs.
//
//   literals     12  true  false  '01'  "01"
//   variables    x
//   arithmetic   a + b   a - b   a * b   -a        (no division: it is partial)
//   comparison   ==  !=  <  <=  >  >=
//   logic        &&  ||  !
//   functions    concat(w, ...)  word(i)  int(w)  len(w)  if(c, a, b)
//
// Arithmetic results take the domain of the left operand (or the right one
// when the left is an unbounded literal) and wrap modulo its size. A quoted
// literal compared with, or assigned to, an enum value names an enum label;
// otherwise it must be a word over the alphabet of at most max_answer_len.
// concat truncates at max_answer_len; word/int use the numeral encoding of
// encode_int/decode_word.

enum class TypeKind { Int, Bool, Enum, Word };

struct Type {
  TypeKind kind = TypeKind::Int;
  bool bounded = false;  // Int only
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  std::vector<std::string> labels;  // Enum only

  static Type of(const Domain& d);
  std::string name() const;
};

struct Expr {
  enum class Op {
    Lit, Str, Var, Neg, Not, Add, Sub, Mul, Eq, Ne, Lt, Le, Gt, Ge, And, Or,
    Concat, ToWord, ToInt, Len, If
  };

  Op op = Op::Lit;
  Value literal;          // Lit (and Str after typing)
  std::string text;       // identifier name or raw string literal
  std::size_t slot = 0;   // Var, after typing
  std::vector<Expr> args;
  Type type;
  std::size_t column = 0;  // 1-based position in the source string
};

/// Everything the type checker needs to resolve names.
struct Scope {
  std::span<const VarDecl> slots;
  const Alphabet* alphabet = nullptr;
  std::size_t max_len = 0;
};

/// Parse an expression. Throws SpecError("<where>:<column>", ...).
Expr parse_expr(std::string_view source, const std::string& where);

/// Resolve names and annotate types in place. `expected`, when given, is
/// the type the context requires (used for enum-label literals and checked).
void typecheck(Expr& e, const Scope& scope, const std::optional<Type>& expected,
               const std::string& where);

/// Parse + typecheck in one go.
Expr compile_expr(std::string_view source, const Scope& scope, const std::optional<Type>& expected,
                  const std::string& where);

struct EvalContext {
  const Alphabet& alphabet;
  std::size_t max_len;
  std::span<const Value> store;
};

/// Total on type-checked expressions over in-domain stores.
Value eval(const Expr& e, const EvalContext& ctx);

}  // namespace loopscope
