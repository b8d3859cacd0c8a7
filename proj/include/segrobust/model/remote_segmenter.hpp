#ifndef SEGROBUST_MODEL_REMOTE_SEGMENTER_HPP
#define SEGROBUST_MODEL_REMOTE_SEGMENTER_HPP

#include <sys/types.h>

#include <memory>
#include <string>

#include "segrobust/model/segmenter.hpp"
#include "segrobust/model/wire.hpp"

namespace segrobust {

struct RemoteOptions {
  int timeout_ms = 120000;
  std::size_t max_frame = wire::kDefaultMaxFrame;
};

// Client side of the frame protocol. Requests are serialized on one
// connection; any protocol violation closes it for good.
class RemoteSegmenter final : public Segmenter {
 public:
  // Performs the handshake immediately. `child` is reaped on destruction.
  RemoteSegmenter(std::unique_ptr<wire::FrameChannel> channel, RemoteOptions options = {},
                  pid_t child = -1);
  ~RemoteSegmenter() override;

  SegmenterDescriptor descriptor() const override { return descriptor_; }
  std::vector<MaskPrediction> predict(const ImageTensor& image, const PointPrompt& prompt) override;
  InputGradient input_gradient(const ImageTensor& image, const PointPrompt& prompt,
                               const BinaryMask& truth, const LossSpec& loss,
                               const std::optional<SegPgdStep>& segpgd,
                               std::optional<std::size_t> head = std::nullopt) override;

  std::size_t negotiated_max_frame() const { return channel_->max_frame(); }
  bool connected() const { return channel_ && channel_->is_open(); }

 private:
  wire::json call(const wire::json& request);

  std::unique_ptr<wire::FrameChannel> channel_;
  RemoteOptions options_;
  pid_t child_;
  std::uint64_t next_id_ = 1;
  SegmenterDescriptor descriptor_;
};

// "tcp:HOST:PORT" or "cmd:PROGRAM [ARGS...]" (the program speaks the
// protocol on stdin/stdout).
std::unique_ptr<RemoteSegmenter> connect_remote(const std::string& endpoint, RemoteOptions options = {});

}  // namespace segrobust

#endif  // SEGROBUST_MODEL_REMOTE_SEGMENTER_HPP
