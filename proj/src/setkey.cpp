// setkey.conf dialect:
//
//   flush;
//   spdflush;
//   add <src> <dst> <ah|esp> <spi> (-A <hmac-md5|hmac-sha1> | -E <aes-cbc|3des-cbc>) <0xKEY>;
//   spdadd <src> <dst> any -P <in|out> ipsec <proto>/transport//require ...;
//
// '#' comments run to end of line; statements may span lines.

#include <cctype>
#include <charconv>
#include <sstream>

#include "seclab/ipsec.hpp"

namespace seclab::ipsec {
namespace {

struct Token {
  std::string text;
  std::size_t line = 1;
  std::size_t column = 1;
};

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t line = 1, column = 1;
  std::size_t i = 0;
  auto advance = [&] {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
    ++i;
  };
  while (i < text.size()) {
    char c = text[i];
    if (c == '#') {
      while (i < text.size() && text[i] != '\n') advance();
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      advance();
    } else if (c == ';') {
      tokens.push_back({";", line, column});
      advance();
    } else {
      Token t{"", line, column};
      while (i < text.size() && text[i] != ';' && text[i] != '#' &&
             !std::isspace(static_cast<unsigned char>(text[i]))) {
        t.text.push_back(text[i]);
        advance();
      }
      tokens.push_back(std::move(t));
    }
  }
  return tokens;
}

[[noreturn]] void fail(const Token& at, const std::string& message) {
  throw SetkeyError(at.line, at.column, message);
}

class Statement {
 public:
  Statement(std::vector<Token> tokens, Token end) : tokens_(std::move(tokens)), end_(std::move(end)) {}

  const Token& next(const char* what) {
    if (pos_ >= tokens_.size()) fail(end_, std::string("expected ") + what + " before ';'");
    return tokens_[pos_++];
  }
  bool done() const { return pos_ >= tokens_.size(); }
  const Token& peek() const { return tokens_[pos_]; }
  void expect_end() {
    if (!done()) fail(tokens_[pos_], "unexpected '" + tokens_[pos_].text + "'");
  }

 private:
  std::vector<Token> tokens_;
  Token end_;
  std::size_t pos_ = 0;
};

wire::Address parse_address(const Token& t) {
  auto a = wire::Address::try_parse(t.text);
  if (!a) fail(t, "invalid address '" + t.text + "'");
  return *a;
}

std::uint32_t parse_spi(const Token& t) {
  std::string_view s = t.text;
  int base = 10;
  if (s.starts_with("0x") || s.starts_with("0X")) {
    s.remove_prefix(2);
    base = 16;
  }
  std::uint32_t value = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), value, base);
  if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
    fail(t, "invalid SPI '" + t.text + "'");
  return value;
}

Bytes parse_hex_key(const Token& t) {
  std::string_view s = t.text;
  if (!s.starts_with("0x") && !s.starts_with("0X")) fail(t, "key must be 0x-prefixed hex");
  s.remove_prefix(2);
  if (s.empty()) fail(t, "empty key");
  if (s.size() % 2 != 0) fail(t, "odd-length hex key");
  Bytes key(s.size() / 2);
  for (std::size_t i = 0; i < key.size(); ++i) {
    auto [p, ec] = std::from_chars(s.data() + 2 * i, s.data() + 2 * i + 2, key[i], 16);
    if (ec != std::errc{} || p != s.data() + 2 * i + 2) fail(t, "invalid hex digit in key");
  }
  return key;
}

void parse_add(Statement& st, SecurityDatabases& db) {
  SecurityAssociation sa;
  sa.src = parse_address(st.next("source address"));
  sa.dst = parse_address(st.next("destination address"));
  const Token& proto = st.next("protocol");
  if (proto.text == "ah")
    sa.protocol = SecProtocol::ah;
  else if (proto.text == "esp")
    sa.protocol = SecProtocol::esp;
  else
    fail(proto, "unknown protocol '" + proto.text + "' (expected ah or esp)");
  sa.spi = parse_spi(st.next("SPI"));

  const Token& flag = st.next("-A or -E");
  const Token& alg = st.next("algorithm");
  if (flag.text == "-A") {
    if (sa.protocol != SecProtocol::ah) fail(flag, "-A (authentication) given for an esp SA");
    if (alg.text == "hmac-md5")
      sa.algorithm = crypto::AuthAlgorithm::hmac_md5;
    else if (alg.text == "hmac-sha1")
      sa.algorithm = crypto::AuthAlgorithm::hmac_sha1;
    else
      fail(alg, "unknown authentication algorithm '" + alg.text + "'");
  } else if (flag.text == "-E") {
    if (sa.protocol != SecProtocol::esp) fail(flag, "-E (encryption) given for an ah SA");
    if (alg.text == "aes-cbc" || alg.text == "rijndael-cbc")
      sa.algorithm = crypto::CipherAlgorithm::aes_cbc;
    else if (alg.text == "3des-cbc")
      sa.algorithm = crypto::CipherAlgorithm::tdes_cbc;
    else
      fail(alg, "unknown encryption algorithm '" + alg.text + "'");
  } else {
    fail(flag, "expected -A or -E, got '" + flag.text + "'");
  }

  const Token& key_token = st.next("key");
  sa.key = parse_hex_key(key_token);
  if (!crypto::key_length_valid(sa.algorithm, sa.key.size()))
    fail(key_token, "key length " + std::to_string(sa.key.size()) + " bytes is invalid for " +
                        std::string(crypto::to_string(sa.algorithm)));
  st.expect_end();

  if (db.find_sa(sa.dst, sa.spi, sa.protocol) != nullptr)
    fail(proto, "duplicate SA (" + sa.dst.to_string() + ", spi " + std::to_string(sa.spi) + ", " +
                    std::string(to_string(sa.protocol)) + ")");
  db.add_sa(std::move(sa));
}

void parse_spdadd(Statement& st, SecurityDatabases& db) {
  SecurityPolicy sp;
  sp.selector_src = parse_address(st.next("source selector"));
  sp.selector_dst = parse_address(st.next("destination selector"));
  const Token& upper = st.next("upper-layer protocol");
  if (upper.text != "any") fail(upper, "only 'any' upper-layer selectors are supported");
  const Token& p = st.next("-P");
  if (p.text != "-P") fail(p, "expected -P");
  const Token& dir = st.next("direction");
  if (dir.text == "in")
    sp.direction = Direction::in;
  else if (dir.text == "out")
    sp.direction = Direction::out;
  else
    fail(dir, "direction must be in or out");
  const Token& action = st.next("ipsec");
  if (action.text != "ipsec") fail(action, "only the 'ipsec' policy action is supported");

  while (!st.done()) {
    const Token& t = st.next("transform");
    // proto/mode/src-dst/level
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
      auto slash = t.text.find('/', start);
      parts.push_back(t.text.substr(start, slash - start));
      if (slash == std::string::npos) break;
      start = slash + 1;
    }
    if (parts.size() != 4) fail(t, "malformed transform '" + t.text + "'");
    if (parts[0] == "ah")
      sp.transforms.push_back(SecProtocol::ah);
    else if (parts[0] == "esp")
      sp.transforms.push_back(SecProtocol::esp);
    else
      fail(t, "unknown transform protocol '" + parts[0] + "'");
    if (parts[1] != "transport") fail(t, "only transport mode is supported");
    if (!parts[2].empty()) fail(t, "tunnel endpoints are not supported in transport mode");
    if (parts[3] != "require") fail(t, "only the 'require' level is supported");
  }
  if (sp.transforms.empty()) fail(action, "policy lists no transforms");
  db.add_policy(std::move(sp));
}

}  // namespace

SetkeyError::SetkeyError(std::size_t line, std::size_t column, const std::string& message)
    : std::runtime_error("setkey:" + std::to_string(line) + ":" + std::to_string(column) + ": " +
                         message),
      line_(line),
      column_(column) {}

void apply_setkey(std::string_view text, SecurityDatabases& db) {
  auto tokens = tokenize(text);
  std::size_t i = 0;
  while (i < tokens.size()) {
    std::vector<Token> body;
    std::size_t j = i;
    while (j < tokens.size() && tokens[j].text != ";") body.push_back(tokens[j++]);
    if (j == tokens.size()) fail(tokens[i], "statement not terminated by ';'");
    if (body.empty()) fail(tokens[j], "empty statement");
    Token keyword = body.front();
    Statement st(std::vector<Token>(body.begin() + 1, body.end()), tokens[j]);
    if (keyword.text == "flush") {
      st.expect_end();
      db.flush();
    } else if (keyword.text == "spdflush") {
      st.expect_end();
      db.spdflush();
    } else if (keyword.text == "add") {
      parse_add(st, db);
    } else if (keyword.text == "spdadd") {
      parse_spdadd(st, db);
    } else {
      fail(keyword, "unknown keyword '" + keyword.text + "'");
    }
    i = j + 1;
  }
}

SecurityDatabases parse_setkey(std::string_view text) {
  SecurityDatabases db;
  apply_setkey(text, db);
  return db;
}

std::string render_setkey(const SecurityDatabases& db) {
  std::ostringstream out;
  out << "flush;\nspdflush;\n";
  for (const auto& sa : db.sad()) {
    out << "add " << sa.src.to_string() << ' ' << sa.dst.to_string() << ' '
        << to_string(sa.protocol) << " 0x" << std::hex << sa.spi << std::dec
        << (sa.protocol == SecProtocol::ah ? " -A " : " -E ") << crypto::to_string(sa.algorithm)
        << "\n\t0x" << wire::to_hex(sa.key) << ";\n";
  }
  for (const auto& sp : db.spd()) {
    out << "spdadd " << sp.selector_src.to_string() << ' ' << sp.selector_dst.to_string()
        << " any -P " << to_string(sp.direction) << " ipsec";
    for (auto t : sp.transforms) out << "\n\t" << to_string(t) << "/transport//require";
    out << ";\n";
  }
  return out.str();
}

SecurityDatabases mirror(const SecurityDatabases& db) {
  SecurityDatabases out;
  for (const auto& sa : db.sad()) {
    auto copy = sa;
    copy.tx_sequence = 0;
    copy.rx_highest_seen = 0;
    out.add_sa(std::move(copy));
  }
  for (auto sp : db.spd()) {
    sp.direction = sp.direction == Direction::in ? Direction::out : Direction::in;
    out.add_policy(std::move(sp));
  }
  return out;
}

std::string_view reference_setkey_conf() {
  return R"(#!/usr/sbin/setkey -f
# Configuration for 192.168.2.12 MD5 and AES

# Flush the SAD and SPD
flush;
spdflush;

# AH SAs
add 192.168.2.22 192.168.2.12 ah 0x200 -A hmac-md5
0xce516b2abf2fa2e6ab952f0454f7ab11;
add 192.168.2.12 192.168.2.22 ah 0x300 -A hmac-md5
0xc2357ddcb7d2eb510448e716afecd4f2;

# ESP SAs
add 192.168.2.22 192.168.2.12 esp 0x201 -E aes-cbc
0xb05e9caf66242c383903c367699ca452d0e8fa41f7aeab1d;
add 192.168.2.12 192.168.2.22 esp 0x301 -E aes-cbc
0xd7ffecd485b1410d6d600598c14728962e4096ff9bf5ea42;

# Security policies
spdadd 192.168.2.22 192.168.2.12 any -P in ipsec
esp/transport//require
ah/transport//require;

spdadd 192.168.2.12 192.168.2.22 any -P out ipsec
esp/transport//require
ah/transport//require;
)";
}

}  // namespace seclab::ipsec
