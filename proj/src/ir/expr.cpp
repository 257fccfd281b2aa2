#include "loopscope/ir/expr.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <limits>

#include "loopscope/ir/errors.hpp"

namespace loopscope {

Type Type::of(const Domain& d) {
  Type t;
  switch (d.kind) {
    case DomainKind::Int:
      t.kind = TypeKind::Int;
      t.bounded = true;
      t.lo = d.lo;
      t.hi = d.hi;
      break;
    case DomainKind::Bool:
      t.kind = TypeKind::Bool;
      break;
    case DomainKind::Enum:
      t.kind = TypeKind::Enum;
      t.labels = d.labels;
      break;
    case DomainKind::Word:
      t.kind = TypeKind::Word;
      break;
  }
  return t;
}

std::string Type::name() const {
  switch (kind) {
    case TypeKind::Int:
      return bounded ? fmt::format("int {}..{}", lo, hi) : "int";
    case TypeKind::Bool:
      return "bool";
    case TypeKind::Enum:
      return "enum";
    case TypeKind::Word:
      return "word";
  }
  return "?";
}

namespace {

enum class Tok { Int, Str, Ident, Op, LParen, RParen, Comma, End };

struct Token {
  Tok kind;
  std::string text;
  std::size_t column;
};

class Lexer {
 public:
  Lexer(std::string_view src, const std::string& where) : src_(src), where_(where) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      const std::size_t col = pos_ + 1;
      if (pos_ >= src_.size()) {
        out.push_back({Tok::End, "", col});
        return out;
      }
      const char c = src_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        std::size_t b = pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        out.push_back({Tok::Int, std::string(src_.substr(b, pos_ - b)), col});
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t b = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
          ++pos_;
        out.push_back({Tok::Ident, std::string(src_.substr(b, pos_ - b)), col});
      } else if (c == '\'' || c == '"') {
        const auto close = src_.find(c, pos_ + 1);
        if (close == std::string_view::npos) fail(col, "unterminated string literal");
        out.push_back({Tok::Str, std::string(src_.substr(pos_ + 1, close - pos_ - 1)), col});
        pos_ = close + 1;
      } else if (c == '(') {
        out.push_back({Tok::LParen, "(", col});
        ++pos_;
      } else if (c == ')') {
        out.push_back({Tok::RParen, ")", col});
        ++pos_;
      } else if (c == ',') {
        out.push_back({Tok::Comma, ",", col});
        ++pos_;
      } else {
        static constexpr std::string_view kTwo[] = {"==", "!=", "<=", ">=", "&&", "||"};
        const auto two = src_.substr(pos_, 2);
        if (std::find(std::begin(kTwo), std::end(kTwo), two) != std::end(kTwo)) {
          out.push_back({Tok::Op, std::string(two), col});
          pos_ += 2;
        } else if (std::string_view("+-*<>!").find(c) != std::string_view::npos) {
          out.push_back({Tok::Op, std::string(1, c), col});
          ++pos_;
        } else if (c == '/' || c == '%') {
          fail(col, std::string("operator '") + c + "' is partial and not supported");
        } else {
          fail(col, std::string("unexpected character '") + c + "'");
        }
      }
    }
  }

 private:
  [[noreturn]] void fail(std::size_t col, const std::string& msg) const {
    throw SpecError(fmt::format("{}:{}", where_, col), "syntax error: " + msg);
  }

  std::string_view src_;
  const std::string& where_;
  std::size_t pos_ = 0;
};

class Parser {
 public:
  Parser(std::vector<Token> toks, const std::string& where) : toks_(std::move(toks)), where_(where) {}

  Expr parse() {
    Expr e = parse_or();
    if (peek().kind != Tok::End) fail(peek().column, "unexpected '" + peek().text + "'");
    return e;
  }

 private:
  const Token& peek() const { return toks_[i_]; }
  Token take() { return toks_[i_++]; }
  bool accept_op(std::string_view op) {
    if (peek().kind == Tok::Op && peek().text == op) {
      ++i_;
      return true;
    }
    return false;
  }
  void expect(Tok k, std::string_view what) {
    if (peek().kind != k) fail(peek().column, fmt::format("expected {}", what));
    ++i_;
  }

  [[noreturn]] void fail(std::size_t col, const std::string& msg) const {
    throw SpecError(fmt::format("{}:{}", where_, col), "syntax error: " + msg);
  }

  static Expr binary(Expr::Op op, Expr l, Expr r, std::size_t col) {
    Expr e;
    e.op = op;
    e.column = col;
    e.args.push_back(std::move(l));
    e.args.push_back(std::move(r));
    return e;
  }

  Expr parse_or() {
    Expr l = parse_and();
    while (peek().kind == Tok::Op && peek().text == "||") {
      const auto col = take().column;
      l = binary(Expr::Op::Or, std::move(l), parse_and(), col);
    }
    return l;
  }

  Expr parse_and() {
    Expr l = parse_cmp();
    while (peek().kind == Tok::Op && peek().text == "&&") {
      const auto col = take().column;
      l = binary(Expr::Op::And, std::move(l), parse_cmp(), col);
    }
    return l;
  }

  Expr parse_cmp() {
    Expr l = parse_add();
    static const std::pair<std::string_view, Expr::Op> kOps[] = {
        {"==", Expr::Op::Eq}, {"!=", Expr::Op::Ne}, {"<", Expr::Op::Lt},
        {"<=", Expr::Op::Le}, {">", Expr::Op::Gt},  {">=", Expr::Op::Ge}};
    if (peek().kind == Tok::Op) {
      for (const auto& [text, op] : kOps) {
        if (peek().text == text) {
          const auto col = take().column;
          return binary(op, std::move(l), parse_add(), col);
        }
      }
    }
    return l;
  }

  Expr parse_add() {
    Expr l = parse_mul();
    while (peek().kind == Tok::Op && (peek().text == "+" || peek().text == "-")) {
      const auto t = take();
      l = binary(t.text == "+" ? Expr::Op::Add : Expr::Op::Sub, std::move(l), parse_mul(), t.column);
    }
    return l;
  }

  Expr parse_mul() {
    Expr l = parse_unary();
    while (peek().kind == Tok::Op && peek().text == "*") {
      const auto col = take().column;
      l = binary(Expr::Op::Mul, std::move(l), parse_unary(), col);
    }
    return l;
  }

  Expr parse_unary() {
    if (peek().kind == Tok::Op && (peek().text == "!" || peek().text == "-")) {
      const auto t = take();
      Expr e;
      e.op = t.text == "!" ? Expr::Op::Not : Expr::Op::Neg;
      e.column = t.column;
      e.args.push_back(parse_unary());
      return e;
    }
    return parse_primary();
  }

  Expr parse_primary() {
    const Token t = take();
    Expr e;
    e.column = t.column;
    switch (t.kind) {
      case Tok::Int: {
        e.op = Expr::Op::Lit;
        try {
          e.literal = static_cast<std::int64_t>(std::stoll(t.text));
        } catch (const std::out_of_range&) {
          fail(t.column, "integer literal out of range");
        }
        return e;
      }
      case Tok::Str:
        e.op = Expr::Op::Str;
        e.text = t.text;
        return e;
      case Tok::LParen: {
        Expr inner = parse_or();
        expect(Tok::RParen, "')'");
        return inner;
      }
      case Tok::Ident: {
        if (t.text == "true" || t.text == "false") {
          e.op = Expr::Op::Lit;
          e.literal = t.text == "true";
          return e;
        }
        if (peek().kind != Tok::LParen) {
          e.op = Expr::Op::Var;
          e.text = t.text;
          return e;
        }
        ++i_;
        static const std::pair<std::string_view, Expr::Op> kFns[] = {
            {"concat", Expr::Op::Concat}, {"word", Expr::Op::ToWord}, {"int", Expr::Op::ToInt},
            {"len", Expr::Op::Len},       {"if", Expr::Op::If}};
        auto it = std::find_if(std::begin(kFns), std::end(kFns),
                               [&](const auto& p) { return p.first == t.text; });
        if (it == std::end(kFns)) fail(t.column, "unknown function '" + t.text + "'");
        e.op = it->second;
        e.text = t.text;
        if (peek().kind != Tok::RParen) {
          e.args.push_back(parse_or());
          while (peek().kind == Tok::Comma) {
            ++i_;
            e.args.push_back(parse_or());
          }
        }
        expect(Tok::RParen, "')'");
        return e;
      }
      default:
        fail(t.column, t.kind == Tok::End ? "unexpected end of expression" : "unexpected '" + t.text + "'");
    }
  }

  std::vector<Token> toks_;
  const std::string& where_;
  std::size_t i_ = 0;
};

class Checker {
 public:
  Checker(const Scope& scope, const std::string& where) : scope_(scope), where_(where) {}

  void check(Expr& e, const std::optional<Type>& expected) {
    infer(e, expected);
    if (expected) require_compatible(e, *expected);
  }

 private:
  [[noreturn]] void fail(const Expr& e, const std::string& msg) const {
    throw SpecError(fmt::format("{}:{}", where_, e.column), msg);
  }

  void require_kind(const Expr& e, TypeKind k, std::string_view ctx) const {
    if (e.type.kind != k) {
      Type want;
      want.kind = k;
      fail(e, fmt::format("type mismatch: {} expects {}, got {}", ctx, want.name(), e.type.name()));
    }
  }

  void require_compatible(const Expr& e, const Type& want) const {
    if (e.type.kind != want.kind)
      fail(e, fmt::format("type mismatch: expected {}, got {}", want.name(), e.type.name()));
    if (want.kind == TypeKind::Enum && e.type.labels != want.labels)
      fail(e, "type mismatch: enum values from different domains");
  }

  void as_enum_label(Expr& e, const Type& enum_type) const {
    auto it = std::find(enum_type.labels.begin(), enum_type.labels.end(), e.text);
    if (it == enum_type.labels.end()) fail(e, "unknown enum label '" + e.text + "'");
    e.op = Expr::Op::Lit;
    e.literal = static_cast<std::int64_t>(it - enum_type.labels.begin());
    e.type = enum_type;
  }

  void as_word_literal(Expr& e) const {
    if (!scope_.alphabet->is_word(e.text))
      fail(e, "type mismatch: literal '" + e.text + "' is not a word over the alphabet");
    if (e.text.size() > scope_.max_len)
      fail(e, fmt::format("word literal '{}' longer than max_answer_len {}", e.text, scope_.max_len));
    e.op = Expr::Op::Lit;
    e.literal = e.text;
    e.type.kind = TypeKind::Word;
  }

  static Type arith_result(const Type& l, const Type& r) {
    Type t;
    t.kind = TypeKind::Int;
    if (l.bounded) {
      t = l;
    } else if (r.bounded) {
      t = r;
    }
    return t;
  }

  void infer(Expr& e, const std::optional<Type>& expected) {
    using Op = Expr::Op;
    switch (e.op) {
      case Op::Lit:
        if (std::holds_alternative<bool>(e.literal)) {
          e.type.kind = TypeKind::Bool;
        } else {
          e.type.kind = TypeKind::Int;
          e.type.bounded = false;
        }
        return;
      case Op::Str:
        if (expected && expected->kind == TypeKind::Enum) {
          as_enum_label(e, *expected);
        } else {
          as_word_literal(e);
        }
        return;
      case Op::Var: {
        auto it = std::find_if(scope_.slots.begin(), scope_.slots.end(),
                               [&](const VarDecl& d) { return d.name == e.text; });
        if (it == scope_.slots.end()) fail(e, "unbound variable '" + e.text + "'");
        e.slot = static_cast<std::size_t>(it - scope_.slots.begin());
        e.type = Type::of(it->domain);
        return;
      }
      case Op::Neg:
        check(e.args[0], std::nullopt);
        require_kind(e.args[0], TypeKind::Int, "'-'");
        e.type = e.args[0].type;
        return;
      case Op::Not:
        check(e.args[0], std::nullopt);
        require_kind(e.args[0], TypeKind::Bool, "'!'");
        e.type.kind = TypeKind::Bool;
        return;
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
        for (auto& a : e.args) {
          check(a, std::nullopt);
          require_kind(a, TypeKind::Int, "arithmetic");
        }
        e.type = arith_result(e.args[0].type, e.args[1].type);
        return;
      case Op::Lt:
      case Op::Le:
      case Op::Gt:
      case Op::Ge:
        for (auto& a : e.args) {
          check(a, std::nullopt);
          require_kind(a, TypeKind::Int, "ordering comparison");
        }
        e.type.kind = TypeKind::Bool;
        return;
      case Op::Eq:
      case Op::Ne:
        check_equality(e);
        e.type.kind = TypeKind::Bool;
        return;
      case Op::And:
      case Op::Or:
        for (auto& a : e.args) {
          check(a, std::nullopt);
          require_kind(a, TypeKind::Bool, "logical operator");
        }
        e.type.kind = TypeKind::Bool;
        return;
      case Op::Concat:
        if (e.args.empty()) fail(e, "concat needs at least one argument");
        for (auto& a : e.args) {
          check(a, std::nullopt);
          require_kind(a, TypeKind::Word, "concat");
        }
        e.type.kind = TypeKind::Word;
        return;
      case Op::ToWord:
        arity(e, 1);
        check(e.args[0], std::nullopt);
        require_kind(e.args[0], TypeKind::Int, "word()");
        e.type.kind = TypeKind::Word;
        return;
      case Op::ToInt:
        arity(e, 1);
        check(e.args[0], std::nullopt);
        require_kind(e.args[0], TypeKind::Word, "int()");
        e.type.kind = TypeKind::Int;
        e.type.bounded = true;
        e.type.lo = 0;
        e.type.hi = max_decoded(*scope_.alphabet, scope_.max_len);
        return;
      case Op::Len:
        arity(e, 1);
        check(e.args[0], std::nullopt);
        require_kind(e.args[0], TypeKind::Word, "len()");
        e.type.kind = TypeKind::Int;
        e.type.bounded = true;
        e.type.lo = 0;
        e.type.hi = static_cast<std::int64_t>(scope_.max_len);
        return;
      case Op::If: {
        arity(e, 3);
        Type cond;
        cond.kind = TypeKind::Bool;
        check(e.args[0], cond);
        // Enum context flows into string-literal branches.
        if (e.args[1].op == Op::Str && e.args[2].op != Op::Str) {
          check(e.args[2], expected);
          check(e.args[1], e.args[2].type);
        } else {
          check(e.args[1], expected);
          check(e.args[2], e.args[1].type.kind == TypeKind::Int ? std::nullopt
                                                                  : std::optional<Type>(e.args[1].type));
        }
        if (e.args[1].type.kind == TypeKind::Int) {
          require_kind(e.args[2], TypeKind::Int, "if()");
          e.type = arith_result(e.args[1].type, e.args[2].type);
        } else {
          e.type = e.args[1].type;
        }
        return;
      }
    }
  }

  void arity(const Expr& e, std::size_t n) const {
    if (e.args.size() != n) fail(e, fmt::format("{}() takes {} argument(s), got {}", e.text, n, e.args.size()));
  }

  void check_equality(Expr& e) {
    auto& l = e.args[0];
    auto& r = e.args[1];
    if (l.op == Expr::Op::Str && r.op != Expr::Op::Str) {
      check(r, std::nullopt);
      check(l, r.type.kind == TypeKind::Enum ? std::optional<Type>(r.type) : std::nullopt);
    } else {
      check(l, std::nullopt);
      if (l.type.kind == TypeKind::Enum) {
        check(r, l.type);
      } else {
        check(r, std::nullopt);
      }
    }
    if (l.type.kind != r.type.kind)
      fail(e, fmt::format("type mismatch: cannot compare {} with {}", l.type.name(), r.type.name()));
    if (l.type.kind == TypeKind::Enum && l.type.labels != r.type.labels)
      fail(e, "type mismatch: enum values from different domains");
  }

  const Scope& scope_;
  const std::string& where_;
};

std::int64_t wrap_to(const Type& t, __int128 v) {
  if (!t.bounded) {
    return static_cast<std::int64_t>(static_cast<unsigned __int128>(v));
  }
  const __int128 size = static_cast<__int128>(t.hi) - t.lo + 1;
  __int128 r = (v - t.lo) % size;
  if (r < 0) r += size;
  return static_cast<std::int64_t>(r + t.lo);
}

}  // namespace

Expr parse_expr(std::string_view source, const std::string& where) {
  Lexer lex(source, where);
  Parser p(lex.run(), where);
  return p.parse();
}

void typecheck(Expr& e, const Scope& scope, const std::optional<Type>& expected, const std::string& where) {
  Checker(scope, where).check(e, expected);
}

Expr compile_expr(std::string_view source, const Scope& scope, const std::optional<Type>& expected,
                  const std::string& where) {
  Expr e = parse_expr(source, where);
  typecheck(e, scope, expected, where);
  return e;
}

Value eval(const Expr& e, const EvalContext& ctx) {
  using Op = Expr::Op;
  auto as_int = [&](const Expr& x) { return std::get<std::int64_t>(eval(x, ctx)); };
  auto as_bool = [&](const Expr& x) { return std::get<bool>(eval(x, ctx)); };
  auto as_word = [&](const Expr& x) { return std::get<Word>(eval(x, ctx)); };

  switch (e.op) {
    case Op::Lit:
    case Op::Str:
      return e.literal;
    case Op::Var:
      return ctx.store[e.slot];
    case Op::Neg:
      return wrap_to(e.type, -static_cast<__int128>(as_int(e.args[0])));
    case Op::Not:
      return !as_bool(e.args[0]);
    case Op::Add:
      return wrap_to(e.type, static_cast<__int128>(as_int(e.args[0])) + as_int(e.args[1]));
    case Op::Sub:
      return wrap_to(e.type, static_cast<__int128>(as_int(e.args[0])) - as_int(e.args[1]));
    case Op::Mul:
      return wrap_to(e.type, static_cast<__int128>(as_int(e.args[0])) * as_int(e.args[1]));
    case Op::Lt:
      return as_int(e.args[0]) < as_int(e.args[1]);
    case Op::Le:
      return as_int(e.args[0]) <= as_int(e.args[1]);
    case Op::Gt:
      return as_int(e.args[0]) > as_int(e.args[1]);
    case Op::Ge:
      return as_int(e.args[0]) >= as_int(e.args[1]);
    case Op::Eq:
      return eval(e.args[0], ctx) == eval(e.args[1], ctx);
    case Op::Ne:
      return eval(e.args[0], ctx) != eval(e.args[1], ctx);
    case Op::And:
      return as_bool(e.args[0]) && as_bool(e.args[1]);
    case Op::Or:
      return as_bool(e.args[0]) || as_bool(e.args[1]);
    case Op::Concat: {
      Word out;
      for (const auto& a : e.args) {
        out += as_word(a);
        if (out.size() >= ctx.max_len) break;
      }
      if (out.size() > ctx.max_len) out.resize(ctx.max_len);
      return out;
    }
    case Op::ToWord:
      return encode_int(as_int(e.args[0]), ctx.alphabet, ctx.max_len);
    case Op::ToInt:
      return decode_word(as_word(e.args[0]), ctx.alphabet);
    case Op::Len:
      return static_cast<std::int64_t>(as_word(e.args[0]).size());
    case Op::If: {
      const Value v = as_bool(e.args[0]) ? eval(e.args[1], ctx) : eval(e.args[2], ctx);
      if (e.type.kind == TypeKind::Int && e.type.bounded)
        return wrap_to(e.type, std::get<std::int64_t>(v));
      return v;
    }
  }
  return std::int64_t{0};
}

}  // namespace loopscope
