#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "etm/ast.hpp"

namespace etm {

enum class TokenKind { kEnd, kIdentifier, kKeyword, kNumber, kString, kSymbol };

struct Token {
  TokenKind kind = TokenKind::kEnd;
  std::string text;  // keywords upper-cased, quoted identifiers/strings unescaped
  QuoteStyle quote = QuoteStyle::kNone;
  std::size_t position = 0;
};

/// Splits SQL text into tokens. Comments, whitespace and trailing semicolons
/// are dropped. Throws ParseError on unterminated quotes or stray characters.
std::vector<Token> tokenize(std::string_view sql);

bool is_reserved_keyword(std::string_view upper_word);

/// Parses one SELECT statement (optionally WITH-prefixed).
Query parse(std::string_view sql);

/// Parses a standalone expression; used by tests and the DDL loader.
Expr parse_expression(std::string_view sql);

}  // namespace etm
