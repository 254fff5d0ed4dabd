// Dense products and 2-D convolutions. All heavy lifting goes through Eigen
// GEMM on row-major views of the flat buffers; im2col/col2im handle geometry.

#include <Eigen/Core>

#include "rocgan/errors.hpp"
#include "rocgan/tensor.hpp"

namespace rocgan {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

struct Geometry {
    std::size_t channels, height, width;  // image side
    std::size_t kh, kw, stride, padding;
    std::size_t out_h, out_w;             // column side
    std::size_t rows() const { return channels * kh * kw; }
    std::size_t cols() const { return out_h * out_w; }
};

// col: (C*kh*kw) x (out_h*out_w)
void im2col(const double* img, const Geometry& g, double* col) {
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.padding);
    for (std::size_t c = 0; c < g.channels; ++c)
        for (std::size_t ki = 0; ki < g.kh; ++ki)
            for (std::size_t kj = 0; kj < g.kw; ++kj) {
                double* row = col + ((c * g.kh + ki) * g.kw + kj) * g.cols();
                for (std::size_t oh = 0; oh < g.out_h; ++oh) {
                    const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) - pad;
                    double* dst = row + oh * g.out_w;
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.height)) {
                        std::fill_n(dst, g.out_w, 0.0);
                        continue;
                    }
                    const double* src = img + (c * g.height + static_cast<std::size_t>(ih)) * g.width;
                    for (std::size_t ow = 0; ow < g.out_w; ++ow) {
                        const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.stride + kj) - pad;
                        dst[ow] = (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.width)) ? 0.0 : src[iw];
                    }
                }
            }
}

// Adjoint of im2col: scatter-adds columns back into the image.
void col2im(const double* col, const Geometry& g, double* img) {
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.padding);
    for (std::size_t c = 0; c < g.channels; ++c)
        for (std::size_t ki = 0; ki < g.kh; ++ki)
            for (std::size_t kj = 0; kj < g.kw; ++kj) {
                const double* row = col + ((c * g.kh + ki) * g.kw + kj) * g.cols();
                for (std::size_t oh = 0; oh < g.out_h; ++oh) {
                    const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) - pad;
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.height)) continue;
                    double* dst = img + (c * g.height + static_cast<std::size_t>(ih)) * g.width;
                    const double* src = row + oh * g.out_w;
                    for (std::size_t ow = 0; ow < g.out_w; ++ow) {
                        const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.stride + kj) - pad;
                        if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(g.width)) dst[iw] += src[ow];
                    }
                }
            }
}

}  // namespace

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding) {
    if (stride == 0) throw ContractError("stride must be >= 1");
    if (in + 2 * padding < kernel)
        throw ContractError("kernel " + std::to_string(kernel) + " larger than padded input " +
                            std::to_string(in + 2 * padding));
    return (in + 2 * padding - kernel) / stride + 1;
}

std::size_t conv_transpose_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding,
                                       std::size_t output_padding) {
    if (stride == 0) throw ContractError("stride must be >= 1");
    if (output_padding >= stride)
        throw ContractError("output_padding " + std::to_string(output_padding) + " must be < stride " +
                            std::to_string(stride));
    const std::size_t full = (in - 1) * stride + kernel + output_padding;
    if (full <= 2 * padding)
        throw ContractError("transposed convolution geometry yields non-positive output size");
    return full - 2 * padding;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw ContractError("matmul dimension mismatch: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const auto m = static_cast<Eigen::Index>(a.dim(0));
    const auto k = static_cast<Eigen::Index>(a.dim(1));
    const auto n = static_cast<Eigen::Index>(b.dim(1));
    std::vector<double> out(static_cast<std::size_t>(m * n));
    MapMat(out.data(), m, n).noalias() = CMapMat(a.data().data(), m, k) * CMapMat(b.data().data(), k, n);
    return detail::make_op({a.dim(0), b.dim(1)}, std::move(out), {a.node(), b.node()}, [m, k, n](detail::Node& self) {
        auto& A = *self.inputs[0];
        auto& B = *self.inputs[1];
        CMapMat g(self.grad.data(), m, n);
        if (A.requires_grad)
            MapMat(A.grad_buffer().data(), m, k).noalias() += g * CMapMat(B.data.data(), k, n).transpose();
        if (B.requires_grad)
            MapMat(B.grad_buffer().data(), k, n).noalias() += CMapMat(A.data.data(), m, k).transpose() * g;
    });
}

Tensor conv2d(const Tensor& x, const Tensor& kernel, std::size_t stride, std::size_t padding) {
    if (x.rank() != 4 || kernel.rank() != 4)
        throw ContractError("conv2d expects 4-D input and kernel, got " + shape_str(x.shape()) + " and " +
                            shape_str(kernel.shape()));
    if (kernel.dim(1) != x.dim(1))
        throw ContractError("conv2d channel mismatch: input " + shape_str(x.shape()) + ", kernel " +
                            shape_str(kernel.shape()));
    const std::size_t n = x.dim(0), f = kernel.dim(0);
    Geometry g{x.dim(1), x.dim(2), x.dim(3), kernel.dim(2), kernel.dim(3), stride, padding, 0, 0};
    g.out_h = conv_output_size(g.height, g.kh, stride, padding);
    g.out_w = conv_output_size(g.width, g.kw, stride, padding);
    const std::size_t rows = g.rows(), cols = g.cols(), img = g.channels * g.height * g.width;

    std::vector<double> columns(n * rows * cols);
    std::vector<double> out(n * f * cols);
    CMapMat kmat(kernel.data().data(), static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(rows));
    for (std::size_t i = 0; i < n; ++i) {
        double* col = columns.data() + i * rows * cols;
        im2col(x.data().data() + i * img, g, col);
        MapMat(out.data() + i * f * cols, static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(cols)).noalias() =
            kmat * CMapMat(col, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    }
    return detail::make_op({n, f, g.out_h, g.out_w}, std::move(out), {x.node(), kernel.node()},
                     [g, n, f, columns = std::move(columns)](detail::Node& self) {
                         auto& X = *self.inputs[0];
                         auto& K = *self.inputs[1];
                         const auto rows = static_cast<Eigen::Index>(g.rows());
                         const auto cols = static_cast<Eigen::Index>(g.cols());
                         const auto fi = static_cast<Eigen::Index>(f);
                         const std::size_t img = g.channels * g.height * g.width;
                         RowMat gcol(rows, cols);
                         for (std::size_t i = 0; i < n; ++i) {
                             CMapMat gout(self.grad.data() + i * f * g.cols(), fi, cols);
                             CMapMat col(columns.data() + i * g.rows() * g.cols(), rows, cols);
                             if (K.requires_grad)
                                 MapMat(K.grad_buffer().data(), fi, rows).noalias() += gout * col.transpose();
                             if (X.requires_grad) {
                                 gcol.noalias() = CMapMat(K.data.data(), fi, rows).transpose() * gout;
                                 col2im(gcol.data(), g, X.grad_buffer().data() + i * img);
                             }
                         }
                     });
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& kernel, std::size_t stride, std::size_t padding,
                        std::size_t output_padding) {
    if (x.rank() != 4 || kernel.rank() != 4)
        throw ContractError("conv_transpose2d expects 4-D input and kernel, got " + shape_str(x.shape()) + " and " +
                            shape_str(kernel.shape()));
    if (kernel.dim(0) != x.dim(1))
        throw ContractError("conv_transpose2d channel mismatch: input " + shape_str(x.shape()) + ", kernel " +
                            shape_str(kernel.shape()));
    const std::size_t n = x.dim(0), cin = x.dim(1), cout = kernel.dim(1);
    const std::size_t kh = kernel.dim(2), kw = kernel.dim(3);
    const std::size_t oh = conv_transpose_output_size(x.dim(2), kh, stride, padding, output_padding);
    const std::size_t ow = conv_transpose_output_size(x.dim(3), kw, stride, padding, output_padding);
    // The paired conv2d maps (cout, oh, ow) back to (cin, x.dim(2), x.dim(3)).
    Geometry g{cout, oh, ow, kh, kw, stride, padding, x.dim(2), x.dim(3)};
    if (conv_output_size(oh, kh, stride, padding) != g.out_h || conv_output_size(ow, kw, stride, padding) != g.out_w)
        throw ContractError("conv_transpose2d geometry does not invert the paired convolution");
    const auto rows = static_cast<Eigen::Index>(g.rows());
    const auto cols = static_cast<Eigen::Index>(g.cols());
    const auto ci = static_cast<Eigen::Index>(cin);
    const std::size_t out_img = cout * oh * ow;

    std::vector<double> out(n * out_img, 0.0);
    RowMat col(rows, cols);
    CMapMat kmat(kernel.data().data(), ci, rows);
    for (std::size_t i = 0; i < n; ++i) {
        col.noalias() = kmat.transpose() * CMapMat(x.data().data() + i * cin * g.cols(), ci, cols);
        col2im(col.data(), g, out.data() + i * out_img);
    }
    return detail::make_op({n, cout, oh, ow}, std::move(out), {x.node(), kernel.node()}, [g, n, cin](detail::Node& self) {
        auto& X = *self.inputs[0];
        auto& K = *self.inputs[1];
        const auto rows = static_cast<Eigen::Index>(g.rows());
        const auto cols = static_cast<Eigen::Index>(g.cols());
        const auto ci = static_cast<Eigen::Index>(cin);
        const std::size_t out_img = g.channels * g.height * g.width;
        RowMat gcol(rows, cols);
        for (std::size_t i = 0; i < n; ++i) {
            im2col(self.grad.data() + i * out_img, g, gcol.data());
            if (X.requires_grad)
                MapMat(X.grad_buffer().data() + i * cin * g.cols(), ci, cols).noalias() +=
                    CMapMat(K.data.data(), ci, rows) * gcol;
            if (K.requires_grad)
                MapMat(K.grad_buffer().data(), ci, rows).noalias() +=
                    CMapMat(X.data.data() + i * cin * g.cols(), ci, cols) * gcol.transpose();
        }
    });
}

}  // namespace rocgan
