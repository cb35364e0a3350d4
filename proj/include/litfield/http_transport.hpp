#pragma once

// HTTPS transport for LiveProvider. Kept out of the umbrella header so that only
// binaries talking to the network pay for cpp-httplib and OpenSSL's TLS layer.

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"

#include "litfield/provider.hpp"

namespace litfield {

class HttpTransport : public Transport {
public:
    explicit HttpTransport(const std::string& base_url = "https://api.semanticscholar.org") : client_(base_url) {
        client_.set_connection_timeout(10);
        client_.set_read_timeout(60);
        client_.set_follow_location(true);
    }

    HttpResponse get(const std::string& path, const std::map<std::string, std::string>& headers) override {
        return convert(client_.Get(path, to_headers(headers)));
    }

    HttpResponse post(const std::string& path, const std::string& body,
                      const std::map<std::string, std::string>& headers) override {
        return convert(client_.Post(path, to_headers(headers), body, "application/json"));
    }

private:
    static httplib::Headers to_headers(const std::map<std::string, std::string>& h) {
        return httplib::Headers(h.begin(), h.end());
    }

    static HttpResponse convert(const httplib::Result& res) {
        HttpResponse out;
        if (!res) return out;
        out.status = res->status;
        out.body = res->body;
        for (const auto& [k, v] : res->headers) out.headers[k] = v;
        return out;
    }

    httplib::Client client_;
};

}  // namespace litfield
