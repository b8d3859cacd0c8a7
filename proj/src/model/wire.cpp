#include "segrobust/model/wire.hpp"

#include <poll.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <csignal>
#include <cstring>

namespace segrobust::wire {

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

const json& field(const json& node, const char* key) {
  if (!node.is_object() || !node.contains(key)) throw ProtocolError(std::string("missing field '") + key + "'");
  return node.at(key);
}

template <typename T>
T get_as(const json& node, const char* key) {
  try {
    return field(node, key).get<T>();
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("bad field '") + key + "': " + e.what());
  }
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (const std::size_t rest = bytes.size() - i; rest > 0) {
    std::uint32_t v = bytes[i] << 16;
    if (rest == 2) v |= bytes[i + 1] << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += rest == 2 ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw ProtocolError("base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::array<int, 4> v{};
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        v[k] = 0;
        ++pad;
      } else {
        if (pad) throw ProtocolError("base64 padding in the middle of a quantum");
        v[k] = decode_char(c);
        if (v[k] < 0) throw ProtocolError("invalid base64 character");
      }
    }
    const std::uint32_t word = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
    out.push_back(static_cast<std::uint8_t>(word >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(word >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(word));
  }
  return out;
}

std::string pack_f32(std::span<const double> values) {
  std::vector<std::uint8_t> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float f = static_cast<float>(values[i]);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<std::uint8_t>(bits >> (8 * b));
  }
  return base64_encode(bytes);
}

std::vector<double> unpack_f32(std::string_view b64, std::size_t expected) {
  const auto bytes = base64_decode(b64);
  if (bytes.size() != expected * 4)
    throw ProtocolError("float buffer holds " + std::to_string(bytes.size()) + " bytes, expected " +
                        std::to_string(expected * 4));
  std::vector<double> out(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[4 * i + b]) << (8 * b);
    float f;
    std::memcpy(&f, &bits, 4);
    out[i] = f;
  }
  return out;
}

std::string pack_mask(const BinaryMask& mask) {
  std::vector<std::uint8_t> bytes((static_cast<std::size_t>(mask.size()) + 7) / 8, 0);
  for (Index i = 0; i < mask.size(); ++i)
    if (mask(i)) bytes[static_cast<std::size_t>(i) / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
  return base64_encode(bytes);
}

BinaryMask unpack_mask(std::string_view b64, Index height, Index width) {
  const auto bytes = base64_decode(b64);
  const auto n = static_cast<std::size_t>(height * width);
  if (bytes.size() != (n + 7) / 8) throw ProtocolError("mask buffer has the wrong length");
  BinaryMask mask(height, width);
  for (std::size_t i = 0; i < n; ++i) mask(static_cast<Index>(i)) = (bytes[i / 8] >> (7 - i % 8)) & 1;
  return mask;
}

json encode_image(const ImageTensor& image) {
  return {{"h", image.height()},
          {"w", image.width()},
          {"data_b64", pack_f32({image.data(), static_cast<std::size_t>(image.size())})}};
}

ImageTensor decode_image(const json& node) {
  const auto h = get_as<Index>(node, "h"), w = get_as<Index>(node, "w");
  if (h < 1 || w < 1 || h > (1 << 15) || w > (1 << 15)) throw ProtocolError("image dimensions out of range");
  const auto values = unpack_f32(get_as<std::string>(node, "data_b64"), static_cast<std::size_t>(h * w * 3));
  ImageTensor image(h, w);
  std::copy(values.begin(), values.end(), image.data());
  return image;
}

json encode_loss(const LossSpec& loss) {
  return {{"kind", to_string(loss.kind)},     {"focal_weight", loss.focal_weight},
          {"dice_weight", loss.dice_weight},  {"gamma", loss.focal_gamma},
          {"alpha", loss.focal_alpha},        {"smooth", loss.dice_smooth}};
}

LossSpec decode_loss(const json& node) {
  LossSpec loss;
  try {
    loss.kind = loss_kind_from_string(get_as<std::string>(node, "kind"));
  } catch (const ConfigError& e) {
    throw ProtocolError(e.what());
  }
  loss.focal_weight = get_as<double>(node, "focal_weight");
  loss.dice_weight = get_as<double>(node, "dice_weight");
  loss.focal_gamma = get_as<double>(node, "gamma");
  loss.focal_alpha = get_as<double>(node, "alpha");
  loss.dice_smooth = get_as<double>(node, "smooth");
  return loss;
}

json handshake_request(std::uint64_t id, std::size_t max_frame) {
  return {{"id", id}, {"op", "handshake"}, {"version", kProtocolVersion}, {"max_frame", max_frame}};
}

json predict_request(std::uint64_t id, const ImageTensor& image, const PointPrompt& prompt) {
  return {{"id", id},
          {"op", "predict"},
          {"image", encode_image(image)},
          {"prompt", {{"type", "point"}, {"x", prompt.x}, {"y", prompt.y}}}};
}

json grad_request(std::uint64_t id, const ImageTensor& image, const PointPrompt& prompt,
                  const BinaryMask& truth, const LossSpec& loss, const std::optional<SegPgdStep>& segpgd,
                  std::optional<std::size_t> head) {
  json req = predict_request(id, image, prompt);
  req["op"] = "grad";
  req["truth_b64"] = pack_mask(truth);
  req["loss"] = encode_loss(loss);
  req["segpgd"] = segpgd ? json{{"t", segpgd->t}, {"T", segpgd->total}} : json(nullptr);
  req["head"] = head ? json(*head) : json(nullptr);
  return req;
}

json shutdown_request(std::uint64_t id) { return {{"id", id}, {"op", "shutdown"}}; }

json ok_response(std::uint64_t id) { return {{"id", id}, {"ok", true}, {"error", nullptr}}; }

json error_response(std::uint64_t id, const std::string& message) {
  return {{"id", id}, {"ok", false}, {"error", message}};
}

json handshake_response(std::uint64_t id, const SegmenterDescriptor& d, std::size_t max_frame) {
  json r = ok_response(id);
  r["version"] = kProtocolVersion;
  r["max_frame"] = max_frame;
  r["descriptor"] = {{"name", d.name}, {"multimask", d.multimask}, {"concurrent_safe", d.concurrent_safe}};
  return r;
}

json predict_response(std::uint64_t id, const std::vector<MaskPrediction>& preds) {
  json r = ok_response(id);
  json masks = json::array();
  for (const auto& p : preds) {
    const PredictionField rounded = p.field.cast<float>().cast<double>();
    masks.push_back({{"mask_b64", pack_mask(threshold(rounded))},
                     {"field_b64", pack_f32({p.field.data(), static_cast<std::size_t>(p.field.size())})},
                     {"score", p.score}});
  }
  r["masks"] = masks;
  return r;
}

json grad_response(std::uint64_t id, const InputGradient& g) {
  json r = ok_response(id);
  r["loss"] = g.loss;
  r["grad_b64"] = pack_f32({g.gradient.data(), static_cast<std::size_t>(g.gradient.size())});
  return r;
}

FrameChannel::FrameChannel(int read_fd, int write_fd, bool owns_fds)
    : read_fd_(read_fd), write_fd_(write_fd), owns_(owns_fds) {
  std::signal(SIGPIPE, SIG_IGN);
}

FrameChannel::~FrameChannel() { close(); }

void FrameChannel::close() {
  if (owns_) {
    if (read_fd_ >= 0) ::close(read_fd_);
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  }
  read_fd_ = write_fd_ = -1;
}

void FrameChannel::read_exact(std::uint8_t* out, std::size_t n, bool allow_eof, bool& eof) {
  std::size_t got = 0;
  eof = false;
  while (got < n) {
    if (timeout_ms_ >= 0) {
      pollfd pfd{read_fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, timeout_ms_);
      if (ready == 0) throw Timeout("no response within " + std::to_string(timeout_ms_) + " ms");
      if (ready < 0 && errno != EINTR) throw ProtocolError(std::string("poll: ") + std::strerror(errno));
      if (ready < 0) continue;
    }
    const ssize_t r = ::read(read_fd_, out + got, n - got);
    if (r < 0 && errno == EINTR) continue;
    if (r < 0) throw ProtocolError(std::string("read: ") + std::strerror(errno));
    if (r == 0) {
      if (allow_eof && got == 0) {
        eof = true;
        return;
      }
      throw ProtocolError("connection closed inside a frame");
    }
    got += static_cast<std::size_t>(r);
  }
}

std::optional<std::string> FrameChannel::read_frame() {
  if (read_fd_ < 0) throw ProtocolError("channel is closed");
  std::array<std::uint8_t, 4> prefix{};
  bool eof = false;
  read_exact(prefix.data(), 4, true, eof);
  if (eof) return std::nullopt;
  const std::size_t len = (std::size_t(prefix[0]) << 24) | (std::size_t(prefix[1]) << 16) |
                          (std::size_t(prefix[2]) << 8) | std::size_t(prefix[3]);
  if (len > max_frame_)
    throw ProtocolError("inbound frame of " + std::to_string(len) + " bytes exceeds limit " +
                        std::to_string(max_frame_));
  std::string body(len, '\0');
  read_exact(reinterpret_cast<std::uint8_t*>(body.data()), len, false, eof);
  return body;
}

void FrameChannel::write_frame(std::string_view body) {
  if (write_fd_ < 0) throw ProtocolError("channel is closed");
  if (body.size() > max_frame_)
    throw ProtocolError("outbound frame of " + std::to_string(body.size()) + " bytes exceeds limit");
  std::string buf(4, '\0');
  const auto len = static_cast<std::uint32_t>(body.size());
  buf[0] = static_cast<char>(len >> 24);
  buf[1] = static_cast<char>(len >> 16);
  buf[2] = static_cast<char>(len >> 8);
  buf[3] = static_cast<char>(len);
  buf.append(body);
  std::size_t sent = 0;
  while (sent < buf.size()) {
    const ssize_t w = ::write(write_fd_, buf.data() + sent, buf.size() - sent);
    if (w < 0 && errno == EINTR) continue;
    if (w < 0) throw ProtocolError(std::string("write: ") + std::strerror(errno));
    sent += static_cast<std::size_t>(w);
  }
}

}  // namespace segrobust::wire
