from setuptools import setup, find_packages

setup(
    name='motionref',
    version='0.1.0',
    description='Motion-guided referring video object segmentation on a synthetic moving-shape benchmark',
    url='https://github.com/QNLSydney/motionref',
    classifiers=[
        'Development Status :: 4 - Beta',
        'Intended Audience :: Science/Research',
        'Programming Language :: Python :: 3 :: Only',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Licence :: MIT Licence',
        'Topic :: Scientific/Engineering :: Image Recognition'
    ],
    license='MIT',
    packages=find_packages(),
    package_data={'motionref': ['schemas/*.json']},
    install_requires=[
        'matplotlib>=3.3.0',
        'scipy>=1.5.0',
        'numpy>=1.19.0',
        'tabulate>=0.8.3',
        'tqdm>=4.41.1',
        'wrapt>=1.10.11',
        'torch>=1.12.0',
        'Pillow>=8.0.0',
        'jsonschema>=3.2.0'
    ],
    extras_require={
        'test': ['pytest>=6.0'],
    },
    entry_points={
        'console_scripts': [
            'motionref=motionref.cli:main',
            'synthbench=motionref.synthbench.cli:main',
        ],
    },
    python_requires='>=3.9'
)
