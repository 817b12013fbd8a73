#pragma once

// Console backend: a message-per-line JSON session over one simulated device,
// and the single-operator TCP endpoint that serves it.
//
// Requests:  {"id":"7","verb":"CAL_STEP", ...arguments}
// Replies:   {"id":"7","ok":true,"type":"CAL", ...}  or  {"id":"7","ok":false,"type":"ERROR","code":"lockout","message":"..."}
//
// Session verbs
//   STATUS                                        -> STATUS snapshot
//   CAL_START {finger, channel, mode?}             -> CAL   (sends SET_CHANNEL)
//   CAL_STEP                                       -> CAL   (sends SET_INTENSITY + STIM_ONCE)
//   CAL_SWITCH {channel}                           -> CAL   (sends SET_CHANNEL)
//   CAL_CONFIRM                                    -> CAL
//   CAL_ABORT                                      -> CAL   (sends STOP)
//   START_TRIAL {channel, intensity_ma} | {target, size, opacity, channel?, intensity_ma?} -> TRIAL
//     (with a visual the trial is a study2 trial and defaults to the calibrated channel)
//   SUBMIT_REPORT {mask, strongest:[x,y], quality} -> RECORDED
//   GET_SESSION                                    -> SESSION
// Wire verbs map one to one onto protocol commands and reply ACK, NAK or STATUS:
//   SET_CHANNEL {channel}, SET_INTENSITY {microamps}, STIM_ONCE, STIM_TRAIN {count, gap_ms},
//   STOP, QUERY_STATUS, RESET_LOCKOUT, ARM, DISARM, VIBRATE {duration_ms, frequency_hz}
//   FRAME {hex} feeds raw bytes to the device link and returns the reply frames as hex.
// A repeated "id" returns the first reply without executing again.

#include <atomic>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "etw/calibration.hpp"
#include "etw/device.hpp"
#include "etw/study.hpp"

namespace etw::console {

struct SessionConfig {
    std::string participant = "P01";
    DevicePolicy policy = DevicePolicy::Electro;
    CalibrationMode calibration_mode = CalibrationMode::Study1;
    int train_count = 10;
    double train_gap_ms = 1000.0;
    std::uint64_t seed = 1;
    device::DeviceConfig device;
};

class ConsoleSession {
public:
    static constexpr std::size_t kIdCacheSize = 1024;

    ConsoleSession(SessionConfig config, const HandMap& map);

    // One request line in, one reply line out (no trailing newline). Never throws.
    std::string handle_line(const std::string& line);

    // STOP, let the device go idle, then DISARM.
    void shutdown();

    device::Device& device() noexcept { return device_; }
    const std::vector<proto::Command>& sent() const noexcept { return sent_; }
    const std::vector<TrialRecord>& records() const noexcept { return records_; }
    const CalibrationTable& calibration() const noexcept { return calibration_; }
    bool awaiting_report() const noexcept { return pending_.has_value(); }

private:
    struct Request;

    std::string dispatch(const Request& req);
    proto::Command send(const proto::Command& c);
    std::string status_reply(const Request& req) const;
    std::string cal_reply(const Request& req) const;
    std::string wire(const Request& req);
    std::string cal_start(const Request& req);
    std::string cal_step(const Request& req);
    std::string cal_switch(const Request& req);
    std::string cal_confirm(const Request& req);
    std::string cal_abort(const Request& req);
    std::string start_trial(const Request& req);
    std::string submit_report(const Request& req);
    std::string get_session(const Request& req) const;
    bool locked_out() const;

    SessionConfig config_;
    const HandMap* map_;
    device::Device device_;
    std::vector<proto::Command> sent_;
    std::optional<CalibrationStepper> stepper_;
    CalibrationTable calibration_;
    std::optional<TrialRecord> pending_;
    std::vector<TrialRecord> records_;
    int next_trial_ = 0;

    std::map<std::string, std::string> replies_;
    std::deque<std::string> reply_order_;
};

// Single-operator endpoint on 127.0.0.1. A second concurrent connection gets
// one BUSY line and is closed.
class ConsoleServer {
public:
    // port 0 picks a free port. Throws Io when the port is in use.
    ConsoleServer(ConsoleSession& session, int port);
    ~ConsoleServer();
    ConsoleServer(const ConsoleServer&) = delete;
    ConsoleServer& operator=(const ConsoleServer&) = delete;

    int port() const noexcept { return port_; }

    // Serves until request_stop(), then shuts the session down.
    void run();
    // Safe to call from a signal handler or another thread.
    void request_stop() noexcept { stop_.store(true); }

private:
    ConsoleSession* session_;
    int listen_fd_ = -1;
    int port_ = 0;
    std::atomic<bool> stop_{false};
};

}  // namespace etw::console
