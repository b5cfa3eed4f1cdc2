def load(path):
    import imageio.v3 as iio
    return iio.imread(path)


def save(path, data):
    from PIL import Image
    Image.fromarray(data).save(path)


class Widget:
    def build(self):
        import ipywidgets as w
        return w.Button()
